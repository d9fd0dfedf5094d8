#pragma once

#include "error.hpp"
#include "estimate.hpp"
#include "index_param.hpp"
#include "io.hpp"
#include "nelder_mead.hpp"
#include "simulate.hpp"
#include "smooth.hpp"
#include "survival.hpp"
#include "transform.hpp"
