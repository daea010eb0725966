#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "docpipe/backend/client.hpp"
#include "docpipe/types.hpp"

namespace docpipe {

struct Window {
  int window_id = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string text;
};

struct WindowingOptions {
  std::size_t window_chars = 2000;
  std::size_t stride_chars = 1500;
};

/// Overlapping character windows over the document.
///
/// Window i nominally covers [i*stride, i*stride + window); the last window
/// is the first whose nominal end reaches the end of the text and is
/// truncated there. Both boundaries are snapped backward to the nearest
/// position preceded by whitespace, so no window starts or ends inside a
/// word unless a single token is longer than the window or stride. Snapping
/// is monotone, so consecutive windows still overlap (or touch) and their
/// union covers the whole document.
std::vector<Window> window_document(const Document& doc, std::size_t window_chars,
                                    std::size_t stride_chars);

struct ExtractionResult {
  std::vector<Span> spans;
  /// The question is not nullable and nothing was found.
  bool forced_empty = false;
};

/// Queries `backend` once per window with `question`, maps answers to
/// document offsets, collapses spans with equal (start, end) to the best
/// score, sorts by score descending then (start, end), and keeps top_k.
/// Windows are queried on up to `workers` threads.
ExtractionResult extract_from_windows(const Document& doc, std::string_view question,
                                      bool nullable, const backend::BackendClient& backend,
                                      int top_k, const WindowingOptions& windowing,
                                      std::size_t workers = 1);

ExtractionResult answer_question(const Document& doc, const QuestionSpec& q,
                                 const backend::BackendClient& backend, int top_k,
                                 const WindowingOptions& windowing = {}, std::size_t workers = 1);

}  // namespace docpipe
