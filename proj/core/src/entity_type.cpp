#include "mer/entity_type.hpp"

namespace mer {

namespace {

constexpr std::array<std::string_view, kEntityTypeCount> kTags = {
    "system_organ_site",       "alcohol_consumption",
    "allergies",               "gender",
    "race_ethnicity",          "rec_drug_use",
    "tobacco_use",             "dx_name",
    "brand_name",              "generic_name",
    "procedure_name",          "test_name",
    "treatment_name",          "time_to_dx_name",
    "time_to_medication_name", "time_to_procedure_name",
    "time_to_test_name",       "time_to_treatment_name",
};

}  // namespace

std::string_view to_tag(EntityType type) { return kTags[index_of(type)]; }

std::optional<EntityType> parse_tag(std::string_view tag) {
  for (std::size_t i = 0; i < kTags.size(); ++i) {
    if (kTags[i] == tag) return static_cast<EntityType>(i);
  }
  return std::nullopt;
}

}  // namespace mer
