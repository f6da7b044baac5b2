#pragma once

#include "support/checker.hpp"
#include "support/oracles.hpp"
