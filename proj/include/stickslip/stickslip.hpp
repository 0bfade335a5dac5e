#pragma once

// Umbrella header.

#include "stickslip/errors.hpp"
#include "stickslip/model.hpp"
#include "stickslip/expm.hpp"
#include "stickslip/modes.hpp"
#include "stickslip/simulator.hpp"
#include "stickslip/certificates.hpp"
#include "stickslip/config.hpp"
#include "stickslip/io.hpp"
#include "stickslip/verify.hpp"
#include "stickslip/commands.hpp"
