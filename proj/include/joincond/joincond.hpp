#pragma once

#include "joincond/condition.hpp"
#include "joincond/errors.hpp"
#include "joincond/experiments.hpp"
#include "joincond/grassmann.hpp"
#include "joincond/linalg.hpp"
#include "joincond/random.hpp"
#include "joincond/refine.hpp"
#include "joincond/segre.hpp"
#include "joincond/tensor.hpp"
#include "joincond/waring.hpp"
