#include "repoqa/kernels.hpp"

#include <exception>

#include "repoqa/eval_harness.hpp"

namespace repoqa {

namespace {

// Runs body(i) for i in [0, n). Exceptions inside the parallel region are
// captured and the first one is rethrown afterwards.
template <typename Body>
void for_each_index(std::size_t n, Execution exec, Body&& body) {
  if (exec == Execution::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(repoqa_kernel_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<RecordScore> score_records(const std::vector<ScoreInput>& inputs, Execution exec) {
  std::vector<RecordScore> out(inputs.size());
  for_each_index(inputs.size(), exec, [&](std::size_t i) {
    const auto& pred = *inputs[i].predicted;
    const auto& gold = *inputs[i].gold;
    out[i] = {score_exact_match(pred, gold), score_recall(pred, gold), score_micro(pred, gold)};
  });
  return out;
}

std::vector<std::vector<Bm25Hit>> bm25_rank_batch(const Bm25Index& index, const std::vector<std::string>& queries,
                                                  std::size_t k, Execution exec) {
  std::vector<std::vector<Bm25Hit>> out(queries.size());
  for_each_index(queries.size(), exec, [&](std::size_t i) { out[i] = index.rank(queries[i], k); });
  return out;
}

}  // namespace repoqa
