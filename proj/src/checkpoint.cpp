#include <cstdio>

#include <json.hpp>

#include "aspectseed/classifier.hpp"
#include "aspectseed/error.hpp"
#include "aspectseed/table_io.hpp"

namespace aspectseed {
namespace {

constexpr int kCheckpointVersion = 1;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used, 16);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ValidationError("bad fingerprint '" + s + "'");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto& m = ck.model;
  nlohmann::ordered_json doc;
  doc["format"] = "aspectseed-cnn";
  doc["version"] = kCheckpointVersion;
  doc["fingerprint"] = hex64(ck.fingerprint);
  doc["classes"] = m.classes();
  doc["class_names"] = ck.class_names;
  doc["dim"] = m.dim();
  doc["filters"] = m.filters();
  doc["windows"] = kWindows;
  doc["dropout"] = m.dropout();
  doc["config"] = {{"epochs", ck.config.epochs},
                   {"batch_size", ck.config.batch_size},
                   {"learning_rate", ck.config.learning_rate},
                   {"dropout", ck.config.dropout},
                   {"filters", ck.config.filters},
                   {"seed", ck.config.seed},
                   {"optimizer", to_string(ck.config.optimizer)}};

  const auto p = m.parameters();
  nlohmann::ordered_json banks = nlohmann::ordered_json::array();
  for (std::size_t wi = 0; wi < kWindows.size(); ++wi) {
    nlohmann::ordered_json kernels = nlohmann::ordered_json::array();
    nlohmann::ordered_json biases = nlohmann::ordered_json::array();
    for (std::size_t f = 0; f < m.filters(); ++f) {
      auto k = m.kernel(wi, f);
      kernels.push_back(std::vector<double>(k.begin(), k.end()));
      biases.push_back(p[m.conv_bias_offset(wi, f)]);
    }
    banks.push_back({{"window", kWindows[wi]}, {"kernels", kernels}, {"bias", biases}});
  }
  doc["filter_banks"] = banks;

  nlohmann::ordered_json weights = nlohmann::ordered_json::array();
  nlohmann::ordered_json bias = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < m.classes(); ++c) {
    const auto* row = p.data() + m.output_weight_offset(c, 0);
    weights.push_back(std::vector<double>(row, row + m.features()));
    bias.push_back(p[m.output_bias_offset(c)]);
  }
  doc["output"] = {{"weights", weights}, {"bias", bias}};
  write_text_file(path, doc.dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_fingerprint) {
  const std::string text = read_text_file(path);
  Checkpoint ck;
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.at("format").get<std::string>() != "aspectseed-cnn") throw ValidationError("not a classifier checkpoint");
    if (doc.at("version").get<int>() != kCheckpointVersion) throw ValidationError("unsupported checkpoint version");
    ck.fingerprint = parse_hex64(doc.at("fingerprint").get<std::string>());
    if (expected_fingerprint && *expected_fingerprint != ck.fingerprint) {
      throw ValidationError(path.string() + ": checkpoint was trained against embeddings " + hex64(ck.fingerprint) +
                            ", got " + hex64(*expected_fingerprint));
    }
    ck.class_names = doc.at("class_names").get<std::vector<std::string>>();
    const auto& cfg = doc.at("config");
    ck.config.epochs = cfg.at("epochs").get<std::size_t>();
    ck.config.batch_size = cfg.at("batch_size").get<std::size_t>();
    ck.config.learning_rate = cfg.at("learning_rate").get<double>();
    ck.config.dropout = cfg.at("dropout").get<double>();
    ck.config.filters = cfg.at("filters").get<std::size_t>();
    ck.config.seed = cfg.at("seed").get<std::uint64_t>();
    ck.config.optimizer = optimizer_from_string(cfg.at("optimizer").get<std::string>());

    const auto dim = doc.at("dim").get<std::size_t>();
    const auto filters = doc.at("filters").get<std::size_t>();
    const auto classes = doc.at("classes").get<std::size_t>();
    if (ck.class_names.size() != classes) throw ValidationError("class_names does not match class count");
    ClassifierModel m(dim, filters, classes, doc.at("dropout").get<double>());
    auto p = m.parameters();

    const auto& banks = doc.at("filter_banks");
    if (banks.size() != kWindows.size()) throw ValidationError("checkpoint filter bank count mismatch");
    for (std::size_t wi = 0; wi < kWindows.size(); ++wi) {
      const auto& bank = banks[wi];
      if (bank.at("window").get<std::size_t>() != kWindows[wi]) throw ValidationError("checkpoint window mismatch");
      const auto& kernels = bank.at("kernels");
      const auto& biases = bank.at("bias");
      if (kernels.size() != filters || biases.size() != filters) throw ValidationError("checkpoint filter count mismatch");
      for (std::size_t f = 0; f < filters; ++f) {
        const auto values = kernels[f].get<std::vector<double>>();
        auto k = m.kernel(wi, f);
        if (values.size() != k.size()) throw ValidationError("checkpoint kernel size mismatch");
        std::copy(values.begin(), values.end(), k.begin());
        p[m.conv_bias_offset(wi, f)] = biases[f].get<double>();
      }
    }
    const auto& out = doc.at("output");
    const auto& weights = out.at("weights");
    const auto& bias = out.at("bias");
    if (weights.size() != classes || bias.size() != classes) throw ValidationError("checkpoint output layer mismatch");
    for (std::size_t c = 0; c < classes; ++c) {
      const auto row = weights[c].get<std::vector<double>>();
      if (row.size() != m.features()) throw ValidationError("checkpoint output row size mismatch");
      std::copy(row.begin(), row.end(), p.begin() + static_cast<std::ptrdiff_t>(m.output_weight_offset(c, 0)));
      p[m.output_bias_offset(c)] = bias[c].get<double>();
    }
    if (!m.all_finite()) throw ValidationError("checkpoint holds non-finite parameters");
    ck.model = std::move(m);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": malformed checkpoint: " + e.what());
  }
  return ck;
}

}  // namespace aspectseed
