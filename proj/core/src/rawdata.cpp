#include "obfdetect/rawdata.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "obfdetect/symexec.hpp"

namespace obfdetect::norm {

namespace {

constexpr const char* kIndexHeader = "id\tlabels\tconstructions\ttag\tseed\trecipe\tprofile";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

RawDocument to_raw_document(const corpus::Sample& s) {
  RawDocument d;
  d.id = s.id;
  d.text = normalize(sym::exec_function(s.function), Style::Alnum);
  d.labels = s.labels;
  d.constructions = s.constructions;
  d.functionality_tag = s.functionality_tag;
  d.seed = s.seed;
  d.profile = s.profile;
  d.recipe = s.recipe;
  return d;
}

std::vector<RawDocument> to_raw_documents(const std::vector<corpus::Sample>& samples) {
  std::vector<RawDocument> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(to_raw_document(s));
  return out;
}

void write_rawdata(const std::filesystem::path& dir, const std::vector<RawDocument>& docs) {
  std::filesystem::create_directories(dir / "docs");
  std::ofstream index(dir / "index.tsv", std::ios::binary);
  if (!index) throw Error("cannot write " + (dir / "index.tsv").string());
  index << kIndexHeader << '\n';
  for (const auto& d : docs) {
    std::ofstream out(dir / "docs" / (d.id + ".txt"), std::ios::binary);
    if (!out) throw Error("cannot write raw document " + d.id);
    out << d.text;
    std::string cons = constructions_to_string(d.constructions);
    if (cons.empty()) cons = "-";
    index << d.id << '\t' << d.labels.to_string() << '\t' << cons << '\t' << d.functionality_tag << '\t'
          << d.seed << '\t' << d.recipe << '\t' << d.profile << '\n';
  }
}

std::vector<RawDocument> read_rawdata(const std::filesystem::path& dir) {
  std::ifstream index(dir / "index.tsv", std::ios::binary);
  if (!index) throw DataError("missing raw data index in " + dir.string());
  std::string line;
  std::getline(index, line);
  if (line != kIndexHeader) throw DataError("unexpected raw data header");
  std::vector<RawDocument> out;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 7) throw DataError("raw data index: expected 7 fields in '" + line + "'");
    RawDocument d;
    d.id = f[0];
    d.labels = LabelSet::parse(f[1]);
    if (f[2] != "-") d.constructions = parse_constructions(f[2]);
    d.functionality_tag = f[3];
    const auto r = std::from_chars(f[4].data(), f[4].data() + f[4].size(), d.seed);
    if (r.ec != std::errc()) throw DataError("raw data index: bad seed '" + f[4] + "'");
    d.recipe = f[5];
    d.profile = f[6];
    std::ifstream in(dir / "docs" / (d.id + ".txt"), std::ios::binary);
    if (!in) throw DataError("missing raw document " + d.id);
    std::stringstream ss;
    ss << in.rdbuf();
    d.text = ss.str();
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace obfdetect::norm
