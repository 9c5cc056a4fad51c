#pragma once

/**
 * @file folhodge.hpp
 * @brief Convenience umbrella: pulls in the whole library.
 */

#include "folhodge/exterior.hpp"
#include "folhodge/model.hpp"
#include "folhodge/operators.hpp"
#include "folhodge/hodge.hpp"
#include "folhodge/catalog.hpp"
#include "folhodge/model_io.hpp"
#include "folhodge/reports.hpp"
