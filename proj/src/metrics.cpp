#include "swarmdet/metrics.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace swarmdet {

namespace {

std::vector<int> set_minus(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool is_sorted_unique(const std::vector<int>& v) {
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] <= v[i - 1]) return false;
  return true;
}

}  // namespace

void validate_ledger(const DetectionLedger& ledger) {
  if (!is_sorted_unique(ledger.initial_huavs))
    throw std::logic_error("ledger: initial head set not sorted/unique");
  std::vector<int> prev = ledger.initial_huavs;
  std::vector<int> destroyed_so_far;
  for (size_t k = 0; k < ledger.rounds.size(); ++k) {
    const DetectionRound& r = ledger.rounds[k];
    if (r.round != static_cast<int>(k) + 1) throw std::logic_error("ledger: round numbering gap");
    if (!is_sorted_unique(r.candidates) || !is_sorted_unique(r.survivors))
      throw std::logic_error("ledger: candidate/survivor sets not sorted/unique");
    for (int c : r.candidates)
      if (std::binary_search(destroyed_so_far.begin(), destroyed_so_far.end(), c))
        throw std::logic_error("ledger: candidate destroyed twice");
    const std::vector<int> expect = set_minus(prev, r.candidates);
    if (expect != r.survivors)
      throw std::logic_error("ledger: survivors != previous \\ candidates at round " +
                             std::to_string(r.round));
    const int redundant =
        static_cast<int>(r.candidates.size() - (prev.size() - r.survivors.size()));
    if (redundant != r.destroyed_fuavs)
      throw std::logic_error("ledger: redundant-kill count mismatch at round " +
                             std::to_string(r.round));
    for (int c : r.candidates) destroyed_so_far.push_back(c);
    std::sort(destroyed_so_far.begin(), destroyed_so_far.end());
    prev = r.survivors;
  }
  if (ledger.complete != prev.empty())
    throw std::logic_error("ledger: complete flag disagrees with final survivor set");
}

double objective_single(const std::vector<int>& candidates, int true_leader) {
  const bool hit = std::find(candidates.begin(), candidates.end(), true_leader) != candidates.end();
  return (hit ? 1.0 : 0.0) - static_cast<double>(candidates.size());
}

MultiObjective objective_multi(const DetectionLedger& ledger, int n) {
  validate_ledger(ledger);
  if (!ledger.complete) throw std::invalid_argument("objective_multi: ledger incomplete");
  if (n <= 0) throw std::invalid_argument("objective_multi: N must be positive");
  int redundant = 0;
  for (const DetectionRound& r : ledger.rounds) redundant += r.destroyed_fuavs;
  MultiObjective out;
  out.redundancy = static_cast<double>(redundant) / n;
  out.j_m = static_cast<double>(ledger.rounds.size()) + out.redundancy;
  return out;
}

double clustering_purity(const std::vector<int>& assignments, const std::vector<int>& truth) {
  if (assignments.size() != truth.size())
    throw std::invalid_argument("clustering_purity: size mismatch");
  if (assignments.empty()) return 1.0;
  std::map<int, std::map<int, int>> overlap;  // predicted label -> true label -> count
  for (size_t i = 0; i < assignments.size(); ++i) ++overlap[assignments[i]][truth[i]];
  int matched = 0;
  for (const auto& [pred, counts] : overlap) {
    int best = 0;
    for (const auto& [label, count] : counts) best = std::max(best, count);
    matched += best;
  }
  return static_cast<double>(matched) / static_cast<double>(assignments.size());
}

nlohmann::json ledger_to_json(const DetectionLedger& ledger) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const DetectionRound& r : ledger.rounds) {
    rounds.push_back({{"round", r.round},
                      {"candidates", r.candidates},
                      {"survivors", r.survivors},
                      {"finish_time", r.finish_time},
                      {"destroyed_fuavs", r.destroyed_fuavs}});
  }
  return {{"initial_huavs", ledger.initial_huavs},
          {"total_uavs", ledger.total_uavs},
          {"complete", ledger.complete},
          {"rounds", std::move(rounds)}};
}

}  // namespace swarmdet
