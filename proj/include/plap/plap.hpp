#pragma once

#include "plap/errors.hpp"
#include "plap/discretization.hpp"
#include "plap/weights.hpp"
#include "plap/linalg.hpp"
#include "plap/functionals.hpp"
#include "plap/optimize.hpp"
#include "plap/newton.hpp"
#include "plap/spectral.hpp"
#include "plap/branch.hpp"
#include "plap/mountain_pass.hpp"
#include "plap/config.hpp"
#include "plap/pipeline.hpp"
#include "plap/report.hpp"
