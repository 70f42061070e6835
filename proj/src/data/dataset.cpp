#include "srr/dataset.hpp"

#include "srr/binary_io.hpp"
#include "srr/error.hpp"

#include <algorithm>
#include <string>

namespace srr {

CandidateList CandidateList::make(std::uint64_t list_id, std::span<const float> inst,
                                  std::span<const std::span<const float>> resps, std::vector<std::uint8_t> labels) {
  if (labels.size() != resps.size()) {
    throw Error(ErrorCode::DimensionMismatch, "list " + std::to_string(list_id) + " has " +
                                                  std::to_string(resps.size()) + " responses but " +
                                                  std::to_string(labels.size()) + " labels");
  }
  CandidateList out;
  out.list_id = list_id;
  out.embeddings.resize(static_cast<Eigen::Index>(resps.size() + 1), static_cast<Eigen::Index>(inst.size()));
  std::copy(inst.begin(), inst.end(), row_span(out.embeddings, 0).begin());
  for (std::size_t i = 0; i < resps.size(); ++i) {
    if (resps[i].size() != inst.size()) {
      throw Error(ErrorCode::DimensionMismatch, "list " + std::to_string(list_id) + " response " + std::to_string(i) +
                                                    " has length " + std::to_string(resps[i].size()) +
                                                    ", instruction has " + std::to_string(inst.size()));
    }
    std::copy(resps[i].begin(), resps[i].end(), row_span(out.embeddings, static_cast<Eigen::Index>(i + 1)).begin());
  }
  out.labels = std::move(labels);
  return out;
}

std::size_t CandidateList::safe_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

SourceTag make_source_tag(std::string_view tag) {
  if (tag.size() > kSourceTagSize) {
    throw Error(ErrorCode::DomainError, "source tag longer than " + std::to_string(kSourceTagSize) + " bytes");
  }
  SourceTag out{};
  std::copy(tag.begin(), tag.end(), out.begin());
  return out;
}

std::string source_tag_string(const SourceTag& tag) {
  const auto end = std::find(tag.begin(), tag.end(), '\0');
  return std::string(tag.begin(), end);
}

void Dataset::add(CandidateList list) {
  if (list.dim() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "list " + std::to_string(list.list_id) + " has d=" +
                                                  std::to_string(list.dim()) + ", dataset has d=" +
                                                  std::to_string(dim_));
  }
  if (list.embeddings.rows() != static_cast<Eigen::Index>(list.labels.size() + 1)) {
    throw Error(ErrorCode::DimensionMismatch, "list " + std::to_string(list.list_id) +
                                                  " embedding rows do not match its label count");
  }
  lists_.push_back(std::move(list));
}

DatasetHeader Dataset::header() const {
  DatasetHeader h;
  h.dim = dim_;
  h.list_count = lists_.size();
  h.source_tag = source_tag_;
  return h;
}

std::string encode_dataset(const Dataset& dataset) {
  ByteWriter w;
  w.bytes(kDatasetMagic);
  w.uint<std::uint32_t>(kDatasetFormatVersion);
  w.uint<std::uint32_t>(dataset.dim());
  w.uint<std::uint64_t>(dataset.size());
  w.bytes({dataset.source_tag().data(), kSourceTagSize});
  for (const CandidateList& list : dataset.lists()) {
    w.uint<std::uint64_t>(list.list_id);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(list.size()));
    for (std::uint8_t y : list.labels) w.uint<std::uint8_t>(y);
    for (Eigen::Index i = 0; i < list.embeddings.size(); ++i) w.f32(list.embeddings.data()[i]);
  }
  return w.take();
}

namespace {

DatasetHeader read_header(ByteReader& r) {
  r.set_context("header");
  if (r.remaining() < kDatasetMagic.size() || r.bytes(kDatasetMagic.size()) != kDatasetMagic) {
    throw Error(ErrorCode::FormatError, "not an SRRF dataset file (bad magic)");
  }
  DatasetHeader h;
  h.format_version = r.uint<std::uint32_t>();
  if (h.format_version != kDatasetFormatVersion) {
    throw Error(ErrorCode::FormatError, "unsupported SRRF format version " + std::to_string(h.format_version));
  }
  h.dim = r.uint<std::uint32_t>();
  h.list_count = r.uint<std::uint64_t>();
  const auto tag = r.bytes(kSourceTagSize);
  std::copy(tag.begin(), tag.end(), h.source_tag.begin());
  if (h.dim == 0) throw Error(ErrorCode::FormatError, "SRRF header declares d=0");
  return h;
}

}  // namespace

DatasetHeader decode_dataset_header(std::string_view bytes) {
  ByteReader r({bytes.data(), bytes.size()}, ErrorCode::TruncatedFile);
  return read_header(r);
}

Dataset decode_dataset(std::string_view bytes) {
  ByteReader r({bytes.data(), bytes.size()}, ErrorCode::TruncatedFile);
  const DatasetHeader h = read_header(r);
  Dataset out(h.dim, h.source_tag);
  for (std::uint64_t index = 0; index < h.list_count; ++index) {
    r.set_context("list index " + std::to_string(index));
    CandidateList list;
    list.list_id = r.uint<std::uint64_t>();
    const auto m = r.uint<std::uint32_t>();
    const auto labels = r.bytes(m);
    list.labels.reserve(m);
    for (char c : labels) {
      const auto y = static_cast<std::uint8_t>(c);
      if (y > 1) {
        throw Error(ErrorCode::FormatError, "list index " + std::to_string(index) + " has label byte " +
                                                std::to_string(y));
      }
      list.labels.push_back(y);
    }
    const std::size_t floats = (static_cast<std::size_t>(m) + 1) * h.dim;
    if (r.remaining() / sizeof(float) < floats) {
      throw Error(ErrorCode::TruncatedFile, "data ends inside list index " + std::to_string(index));
    }
    list.embeddings.resize(static_cast<Eigen::Index>(m) + 1, static_cast<Eigen::Index>(h.dim));
    for (std::size_t i = 0; i < floats; ++i) list.embeddings.data()[i] = r.f32();
    out.add(std::move(list));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::FormatError, std::to_string(r.remaining()) + " trailing bytes after the last list");
  }
  return out;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file(path, encode_dataset(dataset));
}

Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

std::string_view to_string(ListIssue issue) {
  switch (issue) {
    case ListIssue::AllSafe: return "AllSafe";
    case ListIssue::AllUnsafe: return "AllUnsafe";
    case ListIssue::NonFinite: return "NonFinite";
    case ListIssue::TooFew: return "TooFew";
  }
  return "Unknown";
}

bool ValidationReport::ok() const {
  return std::all_of(lists.begin(), lists.end(), [](const ListVerdict& v) { return v.ok(); });
}

std::vector<ListVerdict> ValidationReport::failures() const {
  std::vector<ListVerdict> out;
  std::copy_if(lists.begin(), lists.end(), std::back_inserter(out), [](const ListVerdict& v) { return !v.ok(); });
  return out;
}

std::string ValidationReport::summary(std::size_t max_lines) const {
  std::string out;
  std::size_t shown = 0;
  const auto bad = failures();
  for (const ListVerdict& v : bad) {
    if (shown == max_lines) {
      out += "... " + std::to_string(bad.size() - shown) + " more\n";
      break;
    }
    out += "list " + std::to_string(v.list_id) + " (index " + std::to_string(v.index) + "):";
    for (ListIssue issue : v.issues) out += " " + std::string(to_string(issue));
    out += "\n";
    ++shown;
  }
  return out;
}

ValidationReport validate(const Dataset& dataset, ValidationMode mode) {
  ValidationReport report;
  report.lists.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const CandidateList& list = dataset[i];
    ListVerdict v{i, list.list_id, {}};
    const std::size_t m = list.size();
    const std::size_t min_size = mode == ValidationMode::Train ? 2 : 1;
    if (m < min_size) v.issues.push_back(ListIssue::TooFew);
    if (mode == ValidationMode::Train && m > 0) {
      const std::size_t k = list.safe_count();
      if (k == m) v.issues.push_back(ListIssue::AllSafe);
      if (k == 0) v.issues.push_back(ListIssue::AllUnsafe);
    }
    if (!list.embeddings.allFinite()) v.issues.push_back(ListIssue::NonFinite);
    report.lists.push_back(std::move(v));
  }
  return report;
}

}  // namespace srr
