#pragma once

#include "stratify/bundle.hpp"
#include "stratify/cli.hpp"
#include "stratify/clustering.hpp"
#include "stratify/core.hpp"
#include "stratify/error.hpp"
#include "stratify/io.hpp"
#include "stratify/metrics.hpp"
#include "stratify/predictors.hpp"
#include "stratify/random.hpp"
#include "stratify/report.hpp"
#include "stratify/spline.hpp"
#include "stratify/strata.hpp"
#include "stratify/synth.hpp"
