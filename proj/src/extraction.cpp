#include "docpipe/extraction.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "docpipe/error.hpp"
#include "docpipe/parallel.hpp"

namespace docpipe {

std::vector<Window> window_document(const Document& doc, std::size_t window_chars,
                                    std::size_t stride_chars) {
  if (stride_chars == 0 || stride_chars > window_chars) {
    throw PreconditionError("windowing needs 0 < stride (" + std::to_string(stride_chars) +
                            ") <= window (" + std::to_string(window_chars) + ")");
  }
  const auto& t = doc.text;
  const std::size_t n = t.size();
  if (n <= window_chars) return {Window{0, 0, n, t.str()}};

  auto snap = [&](std::size_t p) {
    std::size_t q = std::min(p, n);
    while (q > 0 && q < n && !text::is_space(t.at(q - 1))) --q;
    return q;
  };

  std::vector<Window> out;
  for (std::size_t i = 0;; ++i) {
    const std::size_t nominal_start = i * stride_chars;
    const std::size_t nominal_end = nominal_start + window_chars;
    const bool last = nominal_end >= n;
    std::size_t start = 0;
    if (i > 0) {
      const Window& prev = out.back();
      start = snap(nominal_start);
      if (start <= prev.start) start = nominal_start;
      start = std::clamp(start, prev.start + 1, prev.end);
    }
    std::size_t end = last ? n : snap(nominal_end);
    if (end <= start) end = std::min(nominal_end, n);
    out.push_back(Window{static_cast<int>(i), start, end, t.slice(start, end)});
    if (last) break;
  }
  return out;
}

ExtractionResult extract_from_windows(const Document& doc, std::string_view question,
                                      bool nullable, const backend::BackendClient& backend,
                                      int top_k, const WindowingOptions& windowing,
                                      std::size_t workers) {
  if (top_k < 1) throw PreconditionError("top_k must be >= 1");
  const auto windows = window_document(doc, windowing.window_chars, windowing.stride_chars);
  std::vector<backend::ExtractiveResult> results(windows.size());
  parallel_for(windows.size(), workers, [&](std::size_t i) {
    try {
      results[i] = backend.extract_spans(question, windows[i].text, top_k);
    } catch (const Error& e) {
      throw StageError("extraction failed on doc '" + doc.doc_id + "' window " +
                           std::to_string(windows[i].window_id) + " (" + backend.model_id() +
                           "): " + e.what(),
                       std::current_exception());
    }
  });

  std::map<std::pair<std::size_t, std::size_t>, Span> best;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (const auto& a : results[i].answers) {
      Span s;
      s.start = windows[i].start + a.start;
      s.end = windows[i].start + a.end;
      s.text = a.text;
      s.score = a.score;
      s.model_id = backend.model_id();
      s.window_id = windows[i].window_id;
      auto [it, inserted] = best.try_emplace({s.start, s.end}, s);
      if (!inserted && s.score > it->second.score) it->second = s;
    }
  }
  ExtractionResult out;
  for (auto& [key, s] : best) out.spans.push_back(std::move(s));
  std::sort(out.spans.begin(), out.spans.end(), [](const Span& a, const Span& b) {
    return std::tuple(-a.score, a.start, a.end) < std::tuple(-b.score, b.start, b.end);
  });
  if (out.spans.size() > static_cast<std::size_t>(top_k)) out.spans.resize(top_k);
  out.forced_empty = out.spans.empty() && !nullable;
  return out;
}

ExtractionResult answer_question(const Document& doc, const QuestionSpec& q,
                                 const backend::BackendClient& backend, int top_k,
                                 const WindowingOptions& windowing, std::size_t workers) {
  return extract_from_windows(doc, q.text, q.nullable, backend, top_k, windowing, workers);
}

}  // namespace docpipe
