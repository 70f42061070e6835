#include "srr/keywords.hpp"

#include "srr/error.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace srr {

namespace {

std::string fold(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool contains_any(const std::string& text, const std::vector<std::string>& markers, bool case_sensitive) {
  return std::any_of(markers.begin(), markers.end(), [&](const std::string& marker) {
    return text.find(case_sensitive ? marker : fold(marker)) != std::string::npos;
  });
}

}  // namespace

void KeywordPolicy::validate() const {
  if (safe_markers.empty() || unsafe_markers.empty()) {
    throw Error(ErrorCode::ConfigError, "keyword policy needs both safe and unsafe markers");
  }
  std::set<std::string> seen;
  for (const auto& marker : safe_markers) {
    if (marker.empty()) throw Error(ErrorCode::ConfigError, "empty safe marker");
    seen.insert(case_sensitive ? marker : fold(marker));
  }
  for (const auto& marker : unsafe_markers) {
    if (marker.empty()) throw Error(ErrorCode::ConfigError, "empty unsafe marker");
    if (seen.contains(case_sensitive ? marker : fold(marker))) {
      throw Error(ErrorCode::ConfigError, "marker \"" + marker + "\" is both safe and unsafe");
    }
  }
}

std::string_view to_string(SafetyLabel label) {
  switch (label) {
    case SafetyLabel::Safe: return "safe";
    case SafetyLabel::Unsafe: return "unsafe";
    case SafetyLabel::Unknown: return "unknown";
  }
  return "unknown";
}

SafetyLabel keyword_label(std::string_view text, const KeywordPolicy& policy) {
  const std::string haystack = policy.case_sensitive ? std::string(text) : fold(text);
  const bool safe = contains_any(haystack, policy.safe_markers, policy.case_sensitive);
  const bool unsafe = contains_any(haystack, policy.unsafe_markers, policy.case_sensitive);
  if (safe == unsafe) return SafetyLabel::Unknown;
  return safe ? SafetyLabel::Safe : SafetyLabel::Unsafe;
}

}  // namespace srr
