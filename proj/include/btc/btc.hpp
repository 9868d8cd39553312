#pragma once

#include "btc/classifier.hpp"
#include "btc/data.hpp"
#include "btc/ensemble.hpp"
#include "btc/error.hpp"
#include "btc/eval.hpp"
#include "btc/kernel.hpp"
#include "btc/linalg.hpp"
#include "btc/parallel.hpp"
#include "btc/spatial.hpp"
#include "btc/synthetic.hpp"
