#pragma once

#include "sarfa/base64.hpp"
#include "sarfa/board_saliency.hpp"
#include "sarfa/chess.hpp"
#include "sarfa/dataset.hpp"
#include "sarfa/errors.hpp"
#include "sarfa/eval.hpp"
#include "sarfa/external_agent.hpp"
#include "sarfa/gateway.hpp"
#include "sarfa/gridworld.hpp"
#include "sarfa/image.hpp"
#include "sarfa/oracle.hpp"
#include "sarfa/process.hpp"
#include "sarfa/render.hpp"
#include "sarfa/saliency.hpp"
#include "sarfa/uci.hpp"
