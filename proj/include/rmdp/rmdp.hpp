// Umbrella header.
#pragma once

#include "rmdp/bellman.hpp"
#include "rmdp/diagnostics.hpp"
#include "rmdp/linalg.hpp"
#include "rmdp/mdp.hpp"
#include "rmdp/regularizer.hpp"
#include "rmdp/solvers.hpp"
