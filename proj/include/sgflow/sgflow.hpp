#pragma once

// Time-dependent incompressible Navier-Stokes with stochastic viscosity:
// adaptive TR-AB2 integration, a stochastic Galerkin solver with
// mean-based PCD-preconditioned flexible GMRES, and Monte Carlo /
// sparse-grid collocation baselines.

#include "sgflow/config.hpp"
#include "sgflow/fem.hpp"
#include "sgflow/gpc.hpp"
#include "sgflow/io.hpp"
#include "sgflow/krylov.hpp"
#include "sgflow/mesh.hpp"
#include "sgflow/oseen.hpp"
#include "sgflow/postprocess.hpp"
#include "sgflow/quadrature.hpp"
#include "sgflow/random_field.hpp"
#include "sgflow/runner.hpp"
#include "sgflow/sampling.hpp"
#include "sgflow/sg.hpp"
#include "sgflow/stepper.hpp"
#include "sgflow/types.hpp"
