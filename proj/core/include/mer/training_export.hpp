#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mer/corpus.hpp"
#include "mer/prompt_builder.hpp"

namespace mer {

/// One supervised fine-tuning pair: baseline prompt + sentence in,
/// annotated sentence out.
struct TrainingPair {
  std::string unprocessed;
  std::string processed;
};

/// One pair per sentence, ordered by (doc_id, sent_index).
std::vector<TrainingPair> export_training_pairs(const Corpus& corpus, const PromptBuilder& builder);

/// Line-delimited {"unprocessed": ..., "processed": ...}.
void write_training_pairs(std::ostream& out, const std::vector<TrainingPair>& pairs);

}  // namespace mer
