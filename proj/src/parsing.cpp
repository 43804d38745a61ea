#include "planlab/parsing.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

namespace planlab {
namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

struct TagHits {
  std::size_t count = 0;
  std::size_t first = std::string_view::npos;
};

TagHits find_all(std::string_view text, std::string_view tag) {
  TagHits hits;
  for (std::size_t pos = text.find(tag); pos != std::string_view::npos;
       pos = text.find(tag, pos + 1)) {
    if (hits.count == 0) hits.first = pos;
    ++hits.count;
  }
  return hits;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool all_space(std::string_view s) {
  for (char c : s) {
    if (!is_space(c)) return false;
  }
  return true;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

// Recursive-descent reader over the answer body.
class BodyReader {
 public:
  explicit BodyReader(std::string_view body) : s_(body) {}

  std::optional<FormatFailure> read(std::vector<Point2<double>>& out) {
    skip_ws();
    if (!eat('[')) return FormatFailure::BadCoordinateSyntax;
    skip_ws();
    if (!eat(']')) {
      while (true) {
        Point2<double> p;
        if (auto err = read_point(p)) return err;
        out.push_back(p);
        skip_ws();
        if (eat(',')) {
          skip_ws();
          continue;
        }
        if (eat(']')) break;
        return FormatFailure::BadCoordinateSyntax;
      }
    }
    skip_ws();
    if (pos_ != s_.size()) return FormatFailure::BadCoordinateSyntax;
    return std::nullopt;
  }

 private:
  std::optional<FormatFailure> read_point(Point2<double>& p) {
    if (!eat('{')) return FormatFailure::BadCoordinateSyntax;
    bool seen[2] = {false, false};
    for (int field = 0; field < 2; ++field) {
      skip_ws();
      if (field == 1) {
        if (!eat(',')) return FormatFailure::BadCoordinateSyntax;
        skip_ws();
      }
      int axis = -1;
      if (!read_key(axis) || seen[axis]) return FormatFailure::BadCoordinateSyntax;
      seen[axis] = true;
      skip_ws();
      if (!eat(':')) return FormatFailure::BadCoordinateSyntax;
      skip_ws();
      double v = 0.0;
      if (auto err = read_number(v)) return err;
      p[axis] = v;
    }
    skip_ws();
    if (!eat('}')) return FormatFailure::BadCoordinateSyntax;
    return std::nullopt;
  }

  bool read_key(int& axis) {
    if (pos_ + 3 > s_.size()) return false;
    const char q = s_[pos_];
    if (q != '\'' && q != '"') return false;
    const char k = s_[pos_ + 1];
    if ((k != 'x' && k != 'y') || s_[pos_ + 2] != q) return false;
    axis = k == 'x' ? 0 : 1;
    pos_ += 3;
    return true;
  }

  std::optional<FormatFailure> read_number(double& value) {
    const std::size_t start = pos_;
    // Named non-finite literals are lexically numbers but never valid values.
    {
      std::size_t k = pos_;
      if (k < s_.size() && (s_[k] == '+' || s_[k] == '-')) ++k;
      for (std::string_view word : {"infinity", "inf", "nan"}) {
        if (k + word.size() <= s_.size()) {
          bool match = true;
          for (std::size_t i = 0; i < word.size(); ++i) {
            if (lower(s_[k + i]) != word[i]) {
              match = false;
              break;
            }
          }
          if (match) return FormatFailure::NonFiniteValue;
        }
      }
    }
    if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
    std::size_t int_digits = 0;
    while (pos_ < s_.size() && is_digit(s_[pos_])) {
      ++pos_;
      ++int_digits;
    }
    std::size_t frac_digits = 0;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && is_digit(s_[pos_])) {
        ++pos_;
        ++frac_digits;
      }
    }
    if (int_digits == 0 && frac_digits == 0) return FormatFailure::BadCoordinateSyntax;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      std::size_t exp_digits = 0;
      while (pos_ < s_.size() && is_digit(s_[pos_])) {
        ++pos_;
        ++exp_digits;
      }
      if (exp_digits == 0) return FormatFailure::BadCoordinateSyntax;
    }
    // The lexeme is validated above, so strtod sees plain decimal text.
    const std::string lexeme(s_.substr(start, pos_ - start));
    value = std::strtod(lexeme.c_str(), nullptr);
    if (!std::isfinite(value)) return FormatFailure::NonFiniteValue;
    return std::nullopt;
  }

  void skip_ws() {
    while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
  }

  bool eat(char c) {
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(FormatFailure failure) {
  switch (failure) {
    case FormatFailure::MissingThink: return "MissingThink";
    case FormatFailure::MissingAnswer: return "MissingAnswer";
    case FormatFailure::BadCoordinateSyntax: return "BadCoordinateSyntax";
    case FormatFailure::WrongPointCount: return "WrongPointCount";
    case FormatFailure::NonFiniteValue: return "NonFiniteValue";
  }
  return "Unknown";
}

ParseOutcome parse_response(std::string_view text, const ParseOptions& options) {
  ParseOutcome out;
  auto fail = [&](FormatFailure f) {
    out.verdict.failure = f;
    return out;
  };

  const TagHits think_open = find_all(text, kThinkOpen);
  const TagHits think_close = find_all(text, kThinkClose);
  if (think_open.count != 1 || think_close.count != 1 ||
      think_close.first < think_open.first + kThinkOpen.size()) {
    return fail(FormatFailure::MissingThink);
  }
  const std::size_t reasoning_begin = think_open.first + kThinkOpen.size();
  const std::string_view reasoning =
      text.substr(reasoning_begin, think_close.first - reasoning_begin);
  if (options.require_reasoning && all_space(reasoning)) {
    return fail(FormatFailure::MissingThink);
  }

  const TagHits answer_open = find_all(text, kAnswerOpen);
  const TagHits answer_close = find_all(text, kAnswerClose);
  const std::size_t think_end = think_close.first + kThinkClose.size();
  if (answer_open.count != 1 || answer_close.count != 1 ||
      answer_open.first < think_end ||
      answer_close.first < answer_open.first + kAnswerOpen.size()) {
    return fail(FormatFailure::MissingAnswer);
  }
  const std::size_t body_begin = answer_open.first + kAnswerOpen.size();
  const std::string_view body = text.substr(body_begin, answer_close.first - body_begin);

  out.verdict.stray_text =
      !all_space(text.substr(0, think_open.first)) ||
      !all_space(text.substr(think_end, answer_open.first - think_end)) ||
      !all_space(text.substr(answer_close.first + kAnswerClose.size()));

  std::vector<Point2<double>> points;
  if (auto err = BodyReader(body).read(points)) return fail(*err);
  if (points.size() != options.expected_n) return fail(FormatFailure::WrongPointCount);

  ParsedResponse parsed;
  parsed.reasoning = std::string(reasoning);
  parsed.raw = std::string(text);
  parsed.trajectory.resize(2, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    parsed.trajectory.col(static_cast<Eigen::Index>(i)) = points[i];
  }
  out.response = std::move(parsed);
  return out;
}

std::string serialize_response(std::string_view reasoning, const Trajectory& trajectory) {
  for (std::string_view tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    if (reasoning.find(tag) != std::string_view::npos) {
      throw std::invalid_argument("reasoning text contains the tag " + std::string(tag));
    }
  }
  if (!trajectory.allFinite()) {
    throw std::invalid_argument("trajectory has non-finite coordinates");
  }
  std::string out;
  out.reserve(reasoning.size() + 32 + 28 * static_cast<std::size_t>(trajectory.cols()));
  out += kThinkOpen;
  out += reasoning;
  out += kThinkClose;
  out += kAnswerOpen;
  out += '[';
  std::vector<char> buf(96);
  for (Eigen::Index i = 0; i < trajectory.cols(); ++i) {
    const char* sep = i == 0 ? "" : ", ";
    int n = std::snprintf(buf.data(), buf.size(), "%s{'x': %.2f, 'y': %.2f}", sep,
                          trajectory(0, i), trajectory(1, i));
    if (n >= static_cast<int>(buf.size())) {
      buf.resize(static_cast<std::size_t>(n) + 1);
      n = std::snprintf(buf.data(), buf.size(), "%s{'x': %.2f, 'y': %.2f}", sep,
                        trajectory(0, i), trajectory(1, i));
    }
    out.append(buf.data(), static_cast<std::size_t>(n));
  }
  out += ']';
  out += kAnswerClose;
  return out;
}

}  // namespace planlab
