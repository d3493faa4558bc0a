#pragma once

#include <vector>

#include <json.hpp>

namespace swarmdet {

struct DetectionRound {
  int round = 0;                 // 1-based r
  std::vector<int> candidates;   // destroyed this round, ascending
  std::vector<int> survivors;    // heads still live afterwards, ascending
  int finish_time = 0;           // clock at round end
  int destroyed_fuavs = 0;       // candidates that were not live heads
};

// Round-by-round record of a detection run. survivors of round r must equal
// the previous survivor set minus that round's candidates; a run is complete
// once no heads survive.
struct DetectionLedger {
  std::vector<int> initial_huavs;  // ascending
  int total_uavs = 0;
  std::vector<DetectionRound> rounds;
  bool complete = false;
};

// Throws std::logic_error when the set algebra is inconsistent:
// survivors_r != survivors_{r-1} \ candidates_r, candidate reuse, or a
// complete flag that disagrees with the final survivor set.
void validate_ledger(const DetectionLedger& ledger);

// 1{true_leader in candidates} - |candidates|.
double objective_single(const std::vector<int>& candidates, int true_leader);

struct MultiObjective {
  double j_m = 0.0;
  double redundancy = 0.0;
};

// j_m = R + (redundant kills)/N over a complete ledger; redundancy is the
// redundant-kill fraction alone.
MultiObjective objective_multi(const DetectionLedger& ledger, int n);

// Standard purity: fraction of points whose predicted cluster's dominant
// true label matches them. Label values are arbitrary; only grouping counts.
double clustering_purity(const std::vector<int>& assignments, const std::vector<int>& truth);

nlohmann::json ledger_to_json(const DetectionLedger& ledger);

}  // namespace swarmdet
