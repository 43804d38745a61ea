#include "planlab/rewards.hpp"

namespace planlab {

double unparseable_floor(CoordinateMode mode, Resolution res) {
  const double worst = mode == CoordinateMode::Normalized
                           ? std::sqrt(2.0)
                           : std::hypot(res.width, res.height);
  return -2.0 * std::log1p(worst);
}

RewardBreakdown score_trajectory(const Trajectory& pred, const Trajectory& gt, Resolution res,
                                 CoordinateMode mode) {
  RewardBreakdown out;
  if (mode == CoordinateMode::Normalized) {
    const Trajectory p = normalize(pred, res);
    const Trajectory g = normalize(gt, res);
    out.ade = ade(p, g);
    out.fde = fde(p, g);
  } else {
    out.ade = ade(pred, gt);
    out.fde = fde(pred, gt);
  }
  out.r_planning = log_smoothed_planning_reward(out.ade, out.fde);
  out.r_format = 1.0;
  out.r_total = out.r_format + out.r_planning;
  return out;
}

RewardBreakdown total_reward(std::string_view response_text, const Trajectory& gt,
                             Resolution res, const RewardOptions& options) {
  if (static_cast<std::size_t>(gt.cols()) != options.expected_n) {
    throw std::invalid_argument("total_reward: ground truth has the wrong number of points");
  }
  ParseOptions parse_opts;
  parse_opts.expected_n = options.expected_n;
  parse_opts.require_reasoning = options.require_reasoning;
  const ParseOutcome parsed = parse_response(response_text, parse_opts);
  if (!parsed.valid()) {
    RewardBreakdown out;
    out.verdict = parsed.verdict;
    out.r_format = 0.0;
    out.r_planning = unparseable_floor(options.mode, res);
    out.r_total = out.r_planning;
    return out;
  }
  RewardBreakdown out = score_trajectory(parsed.response->trajectory, gt, res, options.mode);
  out.verdict = parsed.verdict;
  out.r_format = format_reward(parsed.verdict);
  out.r_total = out.r_format + out.r_planning;
  return out;
}

}  // namespace planlab
