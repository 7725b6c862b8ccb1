#pragma once

#include "pmvol/align.hpp"
#include "pmvol/csv.hpp"
#include "pmvol/date.hpp"
#include "pmvol/error.hpp"
#include "pmvol/garch.hpp"
#include "pmvol/inference.hpp"
#include "pmvol/market_data.hpp"
#include "pmvol/oos.hpp"
#include "pmvol/panel.hpp"
#include "pmvol/parallel.hpp"
#include "pmvol/pipeline.hpp"
#include "pmvol/portfolio.hpp"
#include "pmvol/regression.hpp"
#include "pmvol/rng.hpp"
#include "pmvol/signals.hpp"
#include "pmvol/stats.hpp"
#include "pmvol/synthetic.hpp"
#include "pmvol/volatility.hpp"
