#pragma once

#include <filesystem>
#include <string>

#include "k2q/cleaning.hpp"
#include "k2q/generator.hpp"
#include "k2q/kie_model.hpp"
#include "k2q/templates.hpp"

namespace k2q::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(K2Q_FIXTURE_DIR) / name;
}

/// Scratch directory unique to this process, created on first use.
std::filesystem::path scratch_dir();

/// The packaged corpus after span linking and the cord profile. Loaded once.
const KieDataset& clean_receipts();

const TemplateSuite& demo_suite();
const TemplateSuite& simple_suite();

/// Demo suite, seed 42, per_entity with four booleans per document.
GenerationConfig demo_config();

/// generate(clean_receipts(), demo_suite(), demo_config()). Computed once.
const GenerationResult& demo_generation();

}  // namespace k2q::testing
