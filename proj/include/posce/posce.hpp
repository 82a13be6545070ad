#pragma once

#include "posce/bem.hpp"
#include "posce/channel.hpp"
#include "posce/core.hpp"
#include "posce/eliminator.hpp"
#include "posce/estimator.hpp"
#include "posce/geometry.hpp"
#include "posce/ofdm.hpp"
#include "posce/pilot_design.hpp"
