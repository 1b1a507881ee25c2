#pragma once

#include "micromech/errors.hpp"
#include "micromech/tensor.hpp"
#include "micromech/grid.hpp"
#include "micromech/fft.hpp"
#include "micromech/green.hpp"
#include "micromech/random.hpp"
#include "micromech/solver.hpp"
#include "micromech/microstructure.hpp"
#include "micromech/homogenize.hpp"
#include "micromech/array_file.hpp"
#include "micromech/config_io.hpp"
#include "micromech/dataset.hpp"
#include "micromech/multiscale.hpp"
