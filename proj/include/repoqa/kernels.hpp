#pragma once

// Batch kernels with a serial reference path and an OpenMP path. Both paths
// produce identical results; the serial one is what tests compare against.

#include <cstdint>
#include <string>
#include <vector>

#include "repoqa/bm25.hpp"
#include "repoqa/types.hpp"

namespace repoqa {

struct RecordScore {
  int em = 0;
  int recall = 0;
  double micro = 0.0;
};

struct ScoreInput {
  const std::vector<std::string>* predicted = nullptr;
  const std::vector<std::string>* gold = nullptr;
};

/// Scores each (predicted, gold) pair. Throws ScoringError on an empty gold set.
std::vector<RecordScore> score_records(const std::vector<ScoreInput>& inputs, Execution exec);

/// Ranks each query independently against one index.
std::vector<std::vector<Bm25Hit>> bm25_rank_batch(const Bm25Index& index, const std::vector<std::string>& queries,
                                                  std::size_t k, Execution exec);

}  // namespace repoqa
