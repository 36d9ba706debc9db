#pragma once

// Umbrella header.

#include "phtp/numerics.hpp"
#include "phtp/model.hpp"
#include "phtp/qp.hpp"
#include "phtp/pencil.hpp"
#include "phtp/decomp.hpp"
#include "phtp/ocp.hpp"
#include "phtp/control.hpp"
#include "phtp/turnpike.hpp"
#include "phtp/examples.hpp"
#include "phtp/io.hpp"
#include "phtp/cli.hpp"
