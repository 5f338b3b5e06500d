#pragma once

#include "permlearn/assignment.hpp"
#include "permlearn/checkpoint.hpp"
#include "permlearn/config.hpp"
#include "permlearn/dataset.hpp"
#include "permlearn/error.hpp"
#include "permlearn/gradcheck.hpp"
#include "permlearn/image.hpp"
#include "permlearn/matrix.hpp"
#include "permlearn/model.hpp"
#include "permlearn/permutation.hpp"
#include "permlearn/sequence.hpp"
#include "permlearn/sinkhorn.hpp"
#include "permlearn/synthetic.hpp"
#include "permlearn/train.hpp"
