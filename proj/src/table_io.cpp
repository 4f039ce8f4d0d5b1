#include "aspectseed/table_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "aspectseed/error.hpp"

namespace aspectseed {

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("error while writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_predictions(const std::filesystem::path& path, std::span<const Distribution> predictions,
                       std::span<const std::string> class_names, std::span<const std::size_t> ids) {
  if (!ids.empty() && ids.size() != predictions.size()) throw ValidationError("prediction ids do not match rows");
  std::ostringstream os;
  os << "id\tlabel";
  for (const auto& c : class_names) os << "\tp_" << c;
  os << '\n';
  char buf[64];
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    if (p.size() != class_names.size()) throw ValidationError("prediction width does not match class names");
    os << (ids.empty() ? i : ids[i]) << '\t' << class_names[argmax(p)];
    for (double v : p) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
      os << '\t' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    os << '\n';
  }
  write_text_file(path, os.str());
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

PredictionTable read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const std::string source = path.string();
  PredictionTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  auto header = split_tabs(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "label") {
    throw ParseError(source, 1, "header must be 'id<TAB>label<TAB>p_<class>...'");
  }
  for (std::size_t i = 2; i < header.size(); ++i) {
    if (header[i].rfind("p_", 0) != 0) throw ParseError(source, 1, "probability columns must start with p_");
    table.class_names.push_back(header[i].substr(2));
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != header.size()) throw ParseError(source, lineno, "wrong number of columns");
    std::size_t id = 0;
    auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
    if (ec != std::errc() || p != fields[0].data() + fields[0].size()) throw ParseError(source, lineno, "bad id");
    Distribution probs;
    for (std::size_t i = 2; i < fields.size(); ++i) {
      double v = 0.0;
      auto [q, ec2] = std::from_chars(fields[i].data(), fields[i].data() + fields[i].size(), v);
      if (ec2 != std::errc() || q != fields[i].data() + fields[i].size()) {
        throw ParseError(source, lineno, "bad probability '" + fields[i] + "'");
      }
      probs.push_back(v);
    }
    table.ids.push_back(id);
    table.labels.push_back(fields[1]);
    table.probs.push_back(std::move(probs));
  }
  return table;
}

}  // namespace aspectseed
