#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace mer {

/// The closed set of 18 fine-grained medical entity types.
enum class EntityType : std::uint8_t {
  system_organ_site,
  alcohol_consumption,
  allergies,
  gender,
  race_ethnicity,
  rec_drug_use,
  tobacco_use,
  dx_name,
  brand_name,
  generic_name,
  procedure_name,
  test_name,
  treatment_name,
  time_to_dx_name,
  time_to_medication_name,
  time_to_procedure_name,
  time_to_test_name,
  time_to_treatment_name,
};

inline constexpr std::size_t kEntityTypeCount = 18;

inline constexpr std::array<EntityType, kEntityTypeCount> kAllEntityTypes = {
    EntityType::system_organ_site,       EntityType::alcohol_consumption,
    EntityType::allergies,               EntityType::gender,
    EntityType::race_ethnicity,          EntityType::rec_drug_use,
    EntityType::tobacco_use,             EntityType::dx_name,
    EntityType::brand_name,              EntityType::generic_name,
    EntityType::procedure_name,          EntityType::test_name,
    EntityType::treatment_name,          EntityType::time_to_dx_name,
    EntityType::time_to_medication_name, EntityType::time_to_procedure_name,
    EntityType::time_to_test_name,       EntityType::time_to_treatment_name,
};

/// Canonical snake_case tag, e.g. "dx_name".
std::string_view to_tag(EntityType type);

/// Exact, case-sensitive lookup; anything outside the closed set is nullopt.
std::optional<EntityType> parse_tag(std::string_view tag);

inline constexpr std::size_t index_of(EntityType type) {
  return static_cast<std::size_t>(type);
}

}  // namespace mer
