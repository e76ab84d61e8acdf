#pragma once

#include "flexsft/error.hpp"
#include "flexsft/symbolic.hpp"
#include "flexsft/spectral.hpp"
#include "flexsft/measure.hpp"
#include "flexsft/renewal.hpp"
#include "flexsft/flex.hpp"
#include "flexsft/config.hpp"
#include "flexsft/cli.hpp"
