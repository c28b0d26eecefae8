#pragma once

#include "shnn/error.hpp"
#include "shnn/random.hpp"
#include "shnn/softplus.hpp"
#include "shnn/diffkit.hpp"
#include "shnn/systems.hpp"
#include "shnn/io.hpp"
#include "shnn/model.hpp"
#include "shnn/data.hpp"
#include "shnn/loss.hpp"
#include "shnn/presets.hpp"
#include "shnn/train.hpp"
#include "shnn/eval.hpp"
#include "shnn/dynamics.hpp"
