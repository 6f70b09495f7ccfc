#pragma once

// Everything except the command line front end.
#include "fraccur/deform.hpp"
#include "fraccur/flatnorm.hpp"
#include "fraccur/fractal.hpp"
#include "fraccur/grid.hpp"
#include "fraccur/holder.hpp"
#include "fraccur/io.hpp"
#include "fraccur/pushforward.hpp"
#include "fraccur/sobolev.hpp"
#include "fraccur/young.hpp"
