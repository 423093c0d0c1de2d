#pragma once

#include "wib/capacity.hpp"
#include "wib/carleson.hpp"
#include "wib/config.hpp"
#include "wib/experiment.hpp"
#include "wib/fourier_calibration.hpp"
#include "wib/geometry.hpp"
#include "wib/kernels.hpp"
#include "wib/localization.hpp"
#include "wib/measures.hpp"
#include "wib/numeric.hpp"
#include "wib/params.hpp"
#include "wib/quadrature.hpp"
#include "wib/random.hpp"
#include "wib/report.hpp"
#include "wib/sparse.hpp"
#include "wib/tree.hpp"
