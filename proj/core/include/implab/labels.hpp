#ifndef IMPLAB_LABELS_HPP
#define IMPLAB_LABELS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "implab/common.hpp"

namespace implab {

// One training point. The true label is kept for evaluation and generation
// only; the learner sees it through LabelInfo.
struct Sample {
  std::vector<double> features;
  int true_label = -1;
  bool operator==(const Sample&) const = default;
};

// The imprecise annotation attached to a sample.
//
//   Exact(y)            the label is known
//   Candidates(s)       the true label lies in s (clean partial label)
//   Unlabeled           no information
//   Noisy(y_hat)        an observed label that may be wrong
//   NoisyCandidates(s)  a candidate set built around a possibly-flipped
//                       anchor; contains the anchor, not necessarily the
//                       true label
struct LabelInfo {
  enum class Kind { kExact, kCandidates, kUnlabeled, kNoisy, kNoisyCandidates };

  Kind kind = Kind::kUnlabeled;
  int label = -1;               // Exact / Noisy
  std::vector<int> candidates;  // Candidates / NoisyCandidates, sorted

  static LabelInfo exact(int y);
  static LabelInfo partial(std::vector<int> s);  // throws on empty s
  static LabelInfo unlabeled();
  static LabelInfo noisy(int y_hat);
  static LabelInfo noisy_partial(std::vector<int> s);

  bool contains(int cls) const;
  bool operator==(const LabelInfo&) const = default;
};

struct DatasetMeta {
  std::optional<double> partial_ratio;  // q
  std::optional<double> noise_ratio;    // eta
  std::optional<long> label_budget;     // l
  std::optional<std::uint64_t> seed;
  bool operator==(const DatasetMeta&) const = default;
};

struct ImpreciseDataset {
  std::vector<Sample> samples;
  std::vector<LabelInfo> infos;
  int num_classes = 0;
  DatasetMeta meta;

  size_t size() const { return samples.size(); }
  int feature_dim() const {
    return samples.empty() ? 0 : static_cast<int>(samples[0].features.size());
  }

  // Content equality; metadata participates so that a written-then-read
  // dataset compares equal to its source.
  bool operator==(const ImpreciseDataset&) const = default;
};

// ---------------------------------------------------------------------------
// Synthetic base data: isotropic unit-variance Gaussian blobs whose class
// centers sit on a scaled simplex (a seeded random rotation of the
// coordinate simplex, so the class signal spreads across every feature) with
// the given pairwise separation. Requires num_classes <= dim. Classes are
// exactly balanced when n is divisible by num_classes (round-robin
// assignment). Datasets sharing center_seed share their class geometry, so a
// train/test pair drawn with different sample seeds stays consistent.
ImpreciseDataset make_blobs(int n, int dim, int num_classes, double separation,
                            std::uint64_t seed,
                            std::uint64_t center_seed = 0x5eed);

// ---------------------------------------------------------------------------
// Corruption generators. All are pure functions of (dataset, params, seed)
// and require the input to carry exact labels.

// Candidate set = {true label} union {each other class independently with
// probability q}; draws are consumed sample-major, class-minor.
ImpreciseDataset make_partial(const ImpreciseDataset& d, double q,
                              std::uint64_t seed);

// Each label flips with probability eta to a uniform draw over the other
// C - 1 classes. Output kind is Noisy even when unflipped.
ImpreciseDataset make_symmetric_noise(const ImpreciseDataset& d, double eta,
                                      std::uint64_t seed);

// Each label flips to pair_map(y) with probability eta. A y -> y entry is a
// warning (no-op for that class), not an error.
ImpreciseDataset make_asymmetric_noise(const ImpreciseDataset& d, double eta,
                                       const std::function<int(int)>& pair_map,
                                       std::uint64_t seed);

// The default asymmetric map: y -> (y + 1) mod C.
std::function<int(int)> circular_pair_map(int num_classes);

// Keeps exactly l / C exact labels per class (uniformly chosen); the rest
// become Unlabeled. l must be divisible by C and every class must have at
// least l / C samples.
ImpreciseDataset select_labeled_subset(const ImpreciseDataset& d, long l,
                                       std::uint64_t seed);

// Mixed pipeline: labeled subset of size l -> flip each kept label with
// probability eta to a uniform other class (the anchor) -> candidate set
// around the anchor with ratio q. Labeled entries become NoisyCandidates,
// the rest stay Unlabeled.
ImpreciseDataset make_mixed(const ImpreciseDataset& d, long l, double q,
                            double eta, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset file I/O. UTF-8 CSV with header
//   f0,...,f{D-1},kind,label,candidates,true_label
// kind in {exact, partial, unlabeled, noisy, noisy_partial}; candidates are
// pipe-separated class indices. Floats use 17 significant digits so the
// round trip is exact. Metadata rides in leading "# key=value" comments.
void write_dataset(const ImpreciseDataset& d, const std::string& path);
ImpreciseDataset read_dataset(const std::string& path);

const char* kind_name(LabelInfo::Kind k);

}  // namespace implab

#endif  // IMPLAB_LABELS_HPP
