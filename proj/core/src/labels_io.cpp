#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "implab/labels.hpp"

namespace implab {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

LabelInfo::Kind parse_kind(const std::string& s, long line_no) {
  if (s == "exact") return LabelInfo::Kind::kExact;
  if (s == "partial") return LabelInfo::Kind::kCandidates;
  if (s == "unlabeled") return LabelInfo::Kind::kUnlabeled;
  if (s == "noisy") return LabelInfo::Kind::kNoisy;
  if (s == "noisy_partial") return LabelInfo::Kind::kNoisyCandidates;
  throw ParseError("line " + std::to_string(line_no) +
                   ": unknown label kind '" + s +
                   "' (format version mismatch?)");
}

double parse_double(const std::string& s, long line_no, const char* what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what +
                     " '" + s + "'");
  }
}

int parse_int(const std::string& s, long line_no, const char* what) {
  try {
    size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what +
                     " '" + s + "'");
  }
}

}  // namespace

void write_dataset(const ImpreciseDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);

  out << "# classes=" << d.num_classes << "\n";
  if (d.meta.partial_ratio) out << "# q=" << fmt17(*d.meta.partial_ratio) << "\n";
  if (d.meta.noise_ratio) out << "# eta=" << fmt17(*d.meta.noise_ratio) << "\n";
  if (d.meta.label_budget) out << "# l=" << *d.meta.label_budget << "\n";
  if (d.meta.seed) out << "# seed=" << *d.meta.seed << "\n";

  const int D = d.feature_dim();
  for (int j = 0; j < D; ++j) out << "f" << j << ",";
  out << "kind,label,candidates,true_label\n";

  for (size_t i = 0; i < d.size(); ++i) {
    const Sample& s = d.samples[i];
    const LabelInfo& info = d.infos[i];
    for (int j = 0; j < D; ++j) out << fmt17(s.features[j]) << ",";
    out << kind_name(info.kind) << ",";
    if (info.kind == LabelInfo::Kind::kExact ||
        info.kind == LabelInfo::Kind::kNoisy)
      out << info.label;
    out << ",";
    for (size_t k = 0; k < info.candidates.size(); ++k) {
      if (k) out << "|";
      out << info.candidates[k];
    }
    out << "," << s.true_label << "\n";
  }
  if (!out) throw Error("write failed: " + path);
}

ImpreciseDataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open for reading: " + path);

  ImpreciseDataset d;
  std::string line;
  long line_no = 0;
  bool saw_header = false;
  int feature_dim = -1;
  int max_class_seen = -1;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    if (line[0] == '#') {
      std::string body = line.substr(1);
      std::istringstream ss(body);
      std::string kv;
      while (ss >> kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        if (key == "classes") d.num_classes = parse_int(val, line_no, "classes");
        else if (key == "q") d.meta.partial_ratio = parse_double(val, line_no, "q");
        else if (key == "eta") d.meta.noise_ratio = parse_double(val, line_no, "eta");
        else if (key == "l") d.meta.label_budget = std::stol(val);
        else if (key == "seed") d.meta.seed = std::stoull(val);
      }
      continue;
    }

    auto cells = split(line, ',');
    if (!saw_header) {
      if (cells.size() < 4 || cells[cells.size() - 4] != "kind" ||
          cells.back() != "true_label")
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected header f0,...,kind,label,candidates,true_label");
      feature_dim = static_cast<int>(cells.size()) - 4;
      saw_header = true;
      continue;
    }

    if (static_cast<int>(cells.size()) != feature_dim + 4)
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(feature_dim + 4) + " cells, got " +
                       std::to_string(cells.size()));

    Sample s;
    s.features.resize(feature_dim);
    for (int j = 0; j < feature_dim; ++j)
      s.features[j] = parse_double(cells[j], line_no, "feature");

    const auto kind = parse_kind(cells[feature_dim], line_no);
    const std::string& label_cell = cells[feature_dim + 1];
    const std::string& cand_cell = cells[feature_dim + 2];
    s.true_label = parse_int(cells[feature_dim + 3], line_no, "true_label");
    max_class_seen = std::max(max_class_seen, s.true_label);

    LabelInfo info;
    switch (kind) {
      case LabelInfo::Kind::kExact:
      case LabelInfo::Kind::kNoisy: {
        if (label_cell.empty())
          throw ParseError("line " + std::to_string(line_no) +
                           ": empty label cell for kind " +
                           kind_name(kind));
        int y = parse_int(label_cell, line_no, "label");
        max_class_seen = std::max(max_class_seen, y);
        info = kind == LabelInfo::Kind::kExact ? LabelInfo::exact(y)
                                               : LabelInfo::noisy(y);
        break;
      }
      case LabelInfo::Kind::kUnlabeled:
        info = LabelInfo::unlabeled();
        break;
      case LabelInfo::Kind::kCandidates:
      case LabelInfo::Kind::kNoisyCandidates: {
        if (cand_cell.empty())
          throw ParseError("line " + std::to_string(line_no) +
                           ": empty candidates cell for kind " +
                           kind_name(kind));
        std::vector<int> cand;
        for (const auto& tok : split(cand_cell, '|')) {
          int c = parse_int(tok, line_no, "candidate");
          max_class_seen = std::max(max_class_seen, c);
          cand.push_back(c);
        }
        info = kind == LabelInfo::Kind::kCandidates
                   ? LabelInfo::partial(std::move(cand))
                   : LabelInfo::noisy_partial(std::move(cand));
        break;
      }
    }
    d.samples.push_back(std::move(s));
    d.infos.push_back(std::move(info));
  }

  if (!saw_header) throw ParseError("line 0: missing header row");
  if (d.num_classes == 0) d.num_classes = max_class_seen + 1;
  return d;
}

}  // namespace implab
