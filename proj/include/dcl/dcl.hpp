#pragma once

#include "dcl/angle_coding.hpp"
#include "dcl/error.hpp"
#include "dcl/eval.hpp"
#include "dcl/geometry.hpp"
#include "dcl/harness.hpp"
#include "dcl/io.hpp"
#include "dcl/loss.hpp"
