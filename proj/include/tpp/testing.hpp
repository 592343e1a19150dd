#pragma once

// Fault-injection hooks for negative-control tests. Not for production use.
namespace tpp::testing {

// Reverses the accumulation order of the REDUCE primitive.
void set_reverse_reduce(bool on);
bool reverse_reduce();

}  // namespace tpp::testing
