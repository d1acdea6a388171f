#pragma once
// Umbrella header for the propeller-damage diagnosis library.

#include "propdiag/version.hpp"
#include "propdiag/ioutil.hpp"
#include "propdiag/geometry.hpp"
#include "propdiag/flightlog.hpp"
#include "propdiag/spectral.hpp"
#include "propdiag/augment.hpp"
#include "propdiag/cluster.hpp"
#include "propdiag/svm.hpp"
#include "propdiag/mlp.hpp"
#include "propdiag/synthgen.hpp"
#include "propdiag/dataset.hpp"
#include "propdiag/cascade.hpp"
#include "propdiag/evalkit.hpp"
#include "propdiag/config.hpp"
#include "propdiag/svgplot.hpp"
