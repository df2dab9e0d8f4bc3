#ifndef DPPLEARN_IO_HPP
#define DPPLEARN_IO_HPP

#include "dpplearn/conditional.hpp"
#include "dpplearn/mcmc.hpp"
#include "dpplearn/moments.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dpplearn::io {

/// Split one CSV line on commas (no quoting); fields are trimmed.
std::vector<std::string> split_csv(const std::string& line);

// ---- point patterns: sample_id, x1..xD ------------------------------------------
// One row per point. A sample with no points is a single row whose
// coordinate fields are empty.

struct PointPatterns {
  std::size_t dim = 0;
  std::vector<std::string> ids;        // in order of first appearance
  std::vector<PointConfig> samples;
};

PointPatterns read_point_patterns(std::istream& in);
PointPatterns read_point_patterns(const std::string& path);
void write_point_patterns(std::ostream& out, const std::vector<PointConfig>& samples, std::size_t dim);
void write_point_patterns(const std::string& path, const std::vector<PointConfig>& samples, std::size_t dim);

// ---- chain traces: iter, <params>, log_post, accepted ----------------------------

/// Writes natural-scale parameters (exp of the sampler scale when `log_scale`).
void write_chain(std::ostream& out, const mcmc::Chain& chain, const std::vector<std::string>& names,
                 bool log_scale = true);
void write_chain(const std::string& path, const mcmc::Chain& chain, const std::vector<std::string>& names,
                 bool log_scale = true);

struct ChainTable {
  std::vector<std::string> names;
  mcmc::Chain chain;  // natural-scale samples
};
ChainTable read_chain(std::istream& in);
ChainTable read_chain(const std::string& path);

// ---- image features: item_id, subcategory, feature_block, v1..vK -----------------

struct Subcategory {
  std::string name;
  std::vector<std::string> item_ids;  // ground-set order
  FeatureSet features;

  std::size_t index_of(const std::string& item_id) const;  // throws ConfigError if unknown
};

/// Every item of a subcategory must have a vector for every block.
std::vector<Subcategory> read_features(std::istream& in);
std::vector<Subcategory> read_features(const std::string& path);

// ---- annotations: subcategory, a1..aK, b ; top-k: subcategory, i1..ik ---------------

struct AnnotationRow {
  std::string subcategory;
  std::vector<std::string> partial;
  std::string added;
};
std::vector<AnnotationRow> read_annotations(std::istream& in);
std::vector<AnnotationRow> read_annotations(const std::string& path);

struct TopKRow {
  std::string subcategory;
  std::vector<std::string> items;
};
std::vector<TopKRow> read_topk(std::istream& in);
std::vector<TopKRow> read_topk(const std::string& path);

// ---- moment reports ---------------------------------------------------------------

void write_moment_reports(std::ostream& out, const std::vector<MomentReport>& reports);
void write_moment_reports(const std::string& path, const std::vector<MomentReport>& reports);

}  // namespace dpplearn::io

#endif
