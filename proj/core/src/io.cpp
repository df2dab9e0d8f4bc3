#include "dpplearn/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace dpplearn::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": '" + s + "' is not a number");
  }
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "' for reading");
  return f;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  return f;
}

// Reads the header and returns the remaining non-empty rows with their line numbers.
std::vector<std::string> read_header(std::istream& in, const char* what) {
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) return split_csv(line);
  throw ConfigError(std::string(what) + " file has no header");
}

}  // namespace

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// ---- point patterns -----------------------------------------------------------------

PointPatterns read_point_patterns(std::istream& in) {
  const auto header = read_header(in, "point-pattern");
  if (header.size() < 2 || header[0] != "sample_id")
    throw ConfigError("point-pattern header must be sample_id, x1, ..., xD");
  PointPatterns pp;
  pp.dim = header.size() - 1;
  std::vector<std::vector<std::vector<double>>> rows;
  std::map<std::string, std::size_t> slot;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_csv(line);
    f.resize(std::max(f.size(), header.size()));
    if (f.size() != header.size()) throw ConfigError("line " + std::to_string(lineno) + ": wrong number of fields");
    auto [it, inserted] = slot.emplace(f[0], pp.ids.size());
    if (inserted) {
      pp.ids.push_back(f[0]);
      rows.emplace_back();
    }
    bool all_empty = true;
    for (std::size_t d = 1; d < f.size(); ++d) all_empty = all_empty && f[d].empty();
    if (all_empty) continue;  // empty-sample marker
    std::vector<double> p(pp.dim);
    for (std::size_t d = 0; d < pp.dim; ++d) {
      p[d] = parse_double(f[d + 1], lineno);
      if (!std::isfinite(p[d])) throw ConfigError("line " + std::to_string(lineno) + ": non-finite coordinate");
    }
    rows[it->second].push_back(std::move(p));
  }
  for (const auto& r : rows) {
    MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(pp.dim));
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t d = 0; d < pp.dim; ++d) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = r[i][d];
    pp.samples.emplace_back(std::move(m));
  }
  return pp;
}

PointPatterns read_point_patterns(const std::string& path) {
  auto f = open_in(path);
  return read_point_patterns(f);
}

void write_point_patterns(std::ostream& out, const std::vector<PointConfig>& samples, std::size_t dim) {
  out << "sample_id";
  for (std::size_t d = 1; d <= dim; ++d) out << ",x" << d;
  out << '\n' << std::setprecision(17);
  for (std::size_t t = 0; t < samples.size(); ++t) {
    const auto& s = samples[t];
    if (s.empty()) {
      out << t << std::string(dim, ',') << '\n';
      continue;
    }
    if (s.dim() != dim) throw ConfigError("sample " + std::to_string(t) + " has the wrong dimension");
    for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
      out << t;
      for (Eigen::Index d = 0; d < s.points.cols(); ++d) out << ',' << s.points(i, d);
      out << '\n';
    }
  }
}

void write_point_patterns(const std::string& path, const std::vector<PointConfig>& samples, std::size_t dim) {
  auto f = open_out(path);
  write_point_patterns(f, samples, dim);
}

// ---- chains -------------------------------------------------------------------------

void write_chain(std::ostream& out, const mcmc::Chain& chain, const std::vector<std::string>& names,
                 bool log_scale) {
  if (names.size() != chain.dim()) throw ConfigError("one name per chain column is required");
  out << "iter";
  for (const auto& n : names) out << ',' << n;
  out << ",log_post,accepted\n" << std::setprecision(17);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    out << i;
    for (std::size_t j = 0; j < chain.dim(); ++j) {
      const double v = chain.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out << ',' << (log_scale ? std::exp(v) : v);
    }
    out << ',' << chain.log_post[i] << ',' << static_cast<int>(chain.accepted[i]) << '\n';
  }
}

void write_chain(const std::string& path, const mcmc::Chain& chain, const std::vector<std::string>& names,
                 bool log_scale) {
  auto f = open_out(path);
  write_chain(f, chain, names, log_scale);
}

ChainTable read_chain(std::istream& in) {
  const auto header = read_header(in, "trace");
  if (header.size() < 4 || header.front() != "iter" || header[header.size() - 2] != "log_post" ||
      header.back() != "accepted")
    throw ConfigError("trace header must be iter, <params>, log_post, accepted");
  ChainTable t;
  t.names.assign(header.begin() + 1, header.end() - 2);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw ConfigError("line " + std::to_string(lineno) + ": wrong number of fields");
    std::vector<double> r;
    for (std::size_t j = 1; j + 2 < f.size(); ++j) r.push_back(parse_double(f[j], lineno));
    rows.push_back(std::move(r));
    t.chain.log_post.push_back(parse_double(f[f.size() - 2], lineno));
    t.chain.log_post_upper.push_back(t.chain.log_post.back());
    t.chain.accepted.push_back(parse_double(f.back(), lineno) != 0.0 ? 1 : 0);
  }
  t.chain.sampler = "file";
  t.chain.samples.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < t.names.size(); ++j)
      t.chain.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return t;
}

ChainTable read_chain(const std::string& path) {
  auto f = open_in(path);
  return read_chain(f);
}

// ---- features -----------------------------------------------------------------------

std::size_t Subcategory::index_of(const std::string& item_id) const {
  for (std::size_t i = 0; i < item_ids.size(); ++i)
    if (item_ids[i] == item_id) return i;
  throw ConfigError("item '" + item_id + "' is not part of subcategory '" + name + "'");
}

std::vector<Subcategory> read_features(std::istream& in) {
  const auto header = read_header(in, "feature");
  if (header.size() < 4 || header[0] != "item_id" || header[1] != "subcategory" || header[2] != "feature_block")
    throw ConfigError("feature header must be item_id, subcategory, feature_block, v1, ..., vK");
  // subcategory -> block -> item -> vector
  std::vector<std::string> cat_order;
  std::map<std::string, std::vector<std::string>> items;
  std::map<std::string, std::vector<std::string>> blocks;
  std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> vecs;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < 4) throw ConfigError("line " + std::to_string(lineno) + ": feature row has no values");
    const std::string &item = f[0], &cat = f[1], &block = f[2];
    if (!items.count(cat)) cat_order.push_back(cat);
    auto& it = items[cat];
    if (std::find(it.begin(), it.end(), item) == it.end()) it.push_back(item);
    auto& bl = blocks[cat];
    if (std::find(bl.begin(), bl.end(), block) == bl.end()) bl.push_back(block);
    std::vector<double> v;
    for (std::size_t j = 3; j < f.size(); ++j)
      if (!f[j].empty()) v.push_back(parse_double(f[j], lineno));
    if (vecs[cat][block].count(item))
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate feature row for item '" + item + "'");
    vecs[cat][block][item] = std::move(v);
  }
  std::vector<Subcategory> out;
  for (const auto& cat : cat_order) {
    Subcategory s;
    s.name = cat;
    s.item_ids = items[cat];
    for (const auto& block : blocks[cat]) {
      const auto& per_item = vecs[cat][block];
      std::size_t width = 0;
      for (const auto& [id, v] : per_item) width = std::max(width, v.size());
      MatrixXd m(static_cast<Eigen::Index>(s.item_ids.size()), static_cast<Eigen::Index>(width));
      for (std::size_t i = 0; i < s.item_ids.size(); ++i) {
        const auto found = per_item.find(s.item_ids[i]);
        if (found == per_item.end())
          throw ConfigError("item '" + s.item_ids[i] + "' in '" + cat + "' has no '" + block + "' features");
        if (found->second.size() != width)
          throw ConfigError("feature block '" + block + "' has vectors of different lengths");
        for (std::size_t j = 0; j < width; ++j)
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = found->second[j];
      }
      s.features.block_names.push_back(block);
      s.features.blocks.push_back(std::move(m));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Subcategory> read_features(const std::string& path) {
  auto f = open_in(path);
  return read_features(f);
}

// ---- annotations ----------------------------------------------------------------------

std::vector<AnnotationRow> read_annotations(std::istream& in) {
  const auto header = read_header(in, "annotation");
  if (header.size() < 3 || header[0] != "subcategory" || header.back() != "b")
    throw ConfigError("annotation header must be subcategory, a1, ..., aK, b");
  std::vector<AnnotationRow> out;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw ConfigError("line " + std::to_string(lineno) + ": wrong number of fields");
    AnnotationRow r;
    r.subcategory = f[0];
    r.partial.assign(f.begin() + 1, f.end() - 1);
    r.added = f.back();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<AnnotationRow> read_annotations(const std::string& path) {
  auto f = open_in(path);
  return read_annotations(f);
}

std::vector<TopKRow> read_topk(std::istream& in) {
  const auto header = read_header(in, "top-k");
  if (header.size() < 2 || header[0] != "subcategory") throw ConfigError("top-k header must be subcategory, i1, ..., ik");
  std::vector<TopKRow> out;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw ConfigError("line " + std::to_string(lineno) + ": wrong number of fields");
    out.push_back({f[0], std::vector<std::string>(f.begin() + 1, f.end())});
  }
  return out;
}

std::vector<TopKRow> read_topk(const std::string& path) {
  auto f = open_in(path);
  return read_topk(f);
}

// ---- moment reports -------------------------------------------------------------------

void write_moment_reports(std::ostream& out, const std::vector<MomentReport>& reports) {
  out << "order,dim,theoretical_mean,band_lo,band_hi,empirical,empirical_se,discrepancy,inside_band\n"
      << std::setprecision(12);
  for (const auto& r : reports)
    out << r.order << ',' << r.dim + 1 << ',' << r.theoretical_mean << ',' << r.band_lo << ',' << r.band_hi << ','
        << r.empirical << ',' << r.empirical_se << ',' << r.discrepancy << ',' << (r.inside_band() ? 1 : 0) << '\n';
}

void write_moment_reports(const std::string& path, const std::vector<MomentReport>& reports) {
  auto f = open_out(path);
  write_moment_reports(f, reports);
}

}  // namespace dpplearn::io
