#pragma once

#include "srr/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace srr {

// One instruction with its m scored candidates. Row 0 of `embeddings` is the
// instruction, rows 1..m the responses. labels[i] == 1 marks response i safe.
struct CandidateList {
  std::uint64_t list_id = 0;
  Tensor2<float> embeddings;
  std::vector<std::uint8_t> labels;

  // DimensionMismatch unless every vector has the instruction's length and
  // labels.size() == resps.size().
  static CandidateList make(std::uint64_t list_id, std::span<const float> inst,
                            std::span<const std::span<const float>> resps, std::vector<std::uint8_t> labels);

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(embeddings.cols()); }
  std::size_t safe_count() const;
};

inline constexpr std::string_view kDatasetMagic = "SRRF";
inline constexpr std::uint32_t kDatasetFormatVersion = 1;
inline constexpr std::size_t kSourceTagSize = 32;

using SourceTag = std::array<char, kSourceTagSize>;

// Zero-padded; DomainError if `tag` is longer than kSourceTagSize.
SourceTag make_source_tag(std::string_view tag);
std::string source_tag_string(const SourceTag& tag);

struct DatasetHeader {
  std::uint32_t format_version = kDatasetFormatVersion;
  std::uint32_t dim = 0;
  std::uint64_t list_count = 0;
  SourceTag source_tag{};
};

class Dataset {
 public:
  explicit Dataset(std::uint32_t dim, SourceTag source_tag = {}) : dim_(dim), source_tag_(source_tag) {}

  // DimensionMismatch if the list's vectors are not `dim()` long.
  void add(CandidateList list);

  std::uint32_t dim() const { return dim_; }
  const SourceTag& source_tag() const { return source_tag_; }
  std::span<const CandidateList> lists() const { return lists_; }
  std::size_t size() const { return lists_.size(); }
  const CandidateList& operator[](std::size_t i) const { return lists_[i]; }

  DatasetHeader header() const;

 private:
  std::uint32_t dim_;
  SourceTag source_tag_;
  std::vector<CandidateList> lists_;
};

// SRRF layout, little-endian:
//
//   char[4]   magic "SRRF"
//   u32       format version (kDatasetFormatVersion)
//   u32       d
//   u64       list count
//   char[32]  source tag, zero padded
//   per list:
//     u64       list_id
//     u32       m
//     u8[m]     labels (0 or 1)
//     f32[(m+1)*d]  instruction vector, then responses 1..m
std::string encode_dataset(const Dataset& dataset);
// FormatError on bad magic/version/labels, TruncatedFile (naming the list
// index) when the data ends early.
Dataset decode_dataset(std::string_view bytes);
DatasetHeader decode_dataset_header(std::string_view bytes);

void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

enum class ValidationMode { Train, Eval };

enum class ListIssue { AllSafe, AllUnsafe, NonFinite, TooFew };

std::string_view to_string(ListIssue issue);

struct ListVerdict {
  std::size_t index = 0;
  std::uint64_t list_id = 0;
  std::vector<ListIssue> issues;

  bool ok() const { return issues.empty(); }
};

struct ValidationReport {
  std::vector<ListVerdict> lists;

  bool ok() const;
  std::vector<ListVerdict> failures() const;
  // One line per failing list, e.g. "list 17 (index 3): AllSafe".
  std::string summary(std::size_t max_lines = 20) const;
};

// Train mode needs m >= 2 with both label values present; eval mode needs
// m >= 1. Both reject non-finite vectors.
ValidationReport validate(const Dataset& dataset, ValidationMode mode);

// Audit sidecar: one JSON object per line keyed by list_id. Never consulted
// by training or evaluation.
struct SidecarRecord {
  std::uint64_t list_id = 0;
  std::string instruction;
  std::vector<std::string> responses;

  bool operator==(const SidecarRecord&) const = default;
};

void write_sidecar(std::span<const SidecarRecord> records, const std::filesystem::path& path);
std::vector<SidecarRecord> read_sidecar(const std::filesystem::path& path);

struct SplitResult {
  std::vector<std::uint64_t> train;
  std::vector<std::uint64_t> test;
};

// Seeded sample of `train_count` distinct prompt ids without replacement;
// the rest form the test set. Both keep first-seen order of `prompt_ids`.
// InsufficientPrompts unless train_count < number of distinct ids.
SplitResult split_train_test(std::span<const std::uint64_t> prompt_ids, std::size_t train_count,
                             std::uint64_t seed);

using PromptKey = std::function<std::uint64_t(const CandidateList&)>;

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

// Prompt-level split of a dataset. By default every list is its own prompt.
DatasetSplit split_dataset(const Dataset& dataset, std::size_t train_prompts, std::uint64_t seed,
                           const PromptKey& prompt_of = {});

}  // namespace srr
