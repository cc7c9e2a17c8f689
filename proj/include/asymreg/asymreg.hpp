#pragma once

#include "asymreg/errors.hpp"
#include "asymreg/quadrature.hpp"
#include "asymreg/spectral.hpp"
#include "asymreg/proximal.hpp"
#include "asymreg/state_evolution.hpp"
#include "asymreg/replica.hpp"
#include "asymreg/instance.hpp"
#include "asymreg/oracle_vamp.hpp"
#include "asymreg/experiments.hpp"
#include "asymreg/stats.hpp"
#include "asymreg/io.hpp"
#include "asymreg/config.hpp"
#include "asymreg/cli.hpp"
