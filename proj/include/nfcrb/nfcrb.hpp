// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nfcrb/core.hpp"
#include "nfcrb/geometry.hpp"
#include "nfcrb/steering.hpp"
#include "nfcrb/fim.hpp"
#include "nfcrb/closedform.hpp"
#include "nfcrb/signalsim.hpp"
#include "nfcrb/estimator.hpp"
#include "nfcrb/experiment.hpp"
