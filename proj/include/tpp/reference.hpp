#pragma once

#include <cstdint>

#include "tpp/gemm.hpp"

// Serial reference implementations, kept for tests and benchmarks.
namespace tpp::reference {

// Triple loop with the same per-element order as the blocked engine.
void brgemm(const GemmSpec& spec, const BrgemmBatch& batch, void* C);

void fc_forward(std::int64_t Mb, std::int64_t Nb, std::int64_t Kb, std::int64_t bm, std::int64_t bn,
                std::int64_t bk, const float* A, const float* B, float* C);

}  // namespace tpp::reference
