#include "support.hpp"

#include <unistd.h>

#include "k2q/io.hpp"

namespace k2q::testing {

std::filesystem::path scratch_dir() {
  static const std::filesystem::path dir = [] {
    auto p = std::filesystem::temp_directory_path() / ("k2q-tests-" + std::to_string(::getpid()));
    std::filesystem::create_directories(p);
    return p;
  }();
  return dir;
}

const KieDataset& clean_receipts() {
  static const KieDataset ds = [] {
    KieDataset raw = load_kie_dataset(fixture("receipts.jsonl"));
    link_missing_spans(raw);
    return clean_dataset(raw, builtin_profile("cord")).dataset;
  }();
  return ds;
}

const TemplateSuite& demo_suite() {
  static const TemplateSuite s = load_template_suite(fixture("demo_suite.jsonl"));
  return s;
}

const TemplateSuite& simple_suite() {
  static const TemplateSuite s = load_template_suite(fixture("simple_suite.jsonl"));
  return s;
}

GenerationConfig demo_config() {
  return parse_generation_config(read_text_file(fixture("generate_config.json")));
}

const GenerationResult& demo_generation() {
  static const GenerationResult r = generate(clean_receipts(), demo_suite(), demo_config(), 2);
  return r;
}

}  // namespace k2q::testing
