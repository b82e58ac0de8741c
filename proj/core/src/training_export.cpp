#include "mer/training_export.hpp"

#include <algorithm>
#include <ostream>

#include <nlohmann/json.hpp>

namespace mer {

std::vector<TrainingPair> export_training_pairs(const Corpus& corpus,
                                                const PromptBuilder& builder) {
  std::vector<const Sentence*> order;
  order.reserve(corpus.size());
  for (const auto& s : corpus.sentences()) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const Sentence* a, const Sentence* b) { return a->key < b->key; });

  std::vector<TrainingPair> pairs;
  pairs.reserve(order.size());
  for (const auto* s : order) {
    pairs.push_back({builder.build_baseline(*s).text, serialize_markup(*s)});
  }
  return pairs;
}

void write_training_pairs(std::ostream& out, const std::vector<TrainingPair>& pairs) {
  for (const auto& p : pairs) {
    nlohmann::ordered_json obj;
    obj["unprocessed"] = p.unprocessed;
    obj["processed"] = p.processed;
    out << obj.dump() << '\n';
  }
}

}  // namespace mer
