#pragma once

#include <cstdint>
#include <vector>

#include "rasap/dataset.hpp"

namespace rasap {

// Templated question/SQL pairs over the schema pool. Deterministic for a
// fixed seed; questions name the tables, columns, and literal values they
// use so schema linking and leaf extraction can find them; every grammar
// rule that materializes in trees appears within each window of 100
// examples (KEEP is step padding and never shows up in a tree).
std::vector<Example> generate_synthetic(std::uint64_t seed, int n,
                                        const std::map<std::string, Schema>& schema_pool);

}  // namespace rasap
