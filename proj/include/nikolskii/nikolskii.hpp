#pragma once

#include "nikolskii/analysis.hpp"
#include "nikolskii/core.hpp"
#include "nikolskii/estimators.hpp"
#include "nikolskii/kernel.hpp"
#include "nikolskii/manifold.hpp"
#include "nikolskii/pointsets.hpp"
#include "nikolskii/quadrature.hpp"
#include "nikolskii/randpoly.hpp"
#include "nikolskii/rng.hpp"
#include "nikolskii/spectrum.hpp"
#include "nikolskii/transform.hpp"
