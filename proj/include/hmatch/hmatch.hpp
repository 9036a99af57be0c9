#pragma once

#include "hmatch/classify.hpp"
#include "hmatch/error.hpp"
#include "hmatch/experiment.hpp"
#include "hmatch/io.hpp"
#include "hmatch/matrix.hpp"
#include "hmatch/overlap.hpp"
#include "hmatch/parallel.hpp"
#include "hmatch/random.hpp"
#include "hmatch/spectral.hpp"
#include "hmatch/synth.hpp"
