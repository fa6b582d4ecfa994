#pragma once

#include "jackvar/errors.hpp"
#include "jackvar/measures.hpp"
#include "jackvar/population.hpp"
#include "jackvar/quadrature.hpp"
#include "jackvar/functionals.hpp"
#include "jackvar/random.hpp"
#include "jackvar/jackknife.hpp"
#include "jackvar/asymptotics.hpp"
#include "jackvar/montecarlo.hpp"
