#include "uncerseg/trace.hpp"

#include <json.hpp>

namespace uncerseg {

using nlohmann::ordered_json;

namespace {

ordered_json to_json(const BBox& b) { return ordered_json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

ordered_json to_json(const std::vector<PointPrompt>& points) {
  ordered_json out = ordered_json::array();
  for (const auto& p : points) out.push_back({{"x", p.x}, {"y", p.y}, {"label", std::string(to_string(p.label))}});
  return out;
}

ordered_json to_json(const PromptSet& prompts) {
  ordered_json boxes = ordered_json::array();
  for (const auto& b : prompts.boxes) boxes.push_back(to_json(b));
  return {{"boxes", boxes}, {"points", to_json(prompts.points)}};
}

}  // namespace

std::string prompts_to_json(const PromptSet& prompts) { return to_json(prompts).dump(); }

PromptSet prompts_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw DomainError(std::string("prompt JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("boxes") || !j["boxes"].is_array()) {
    throw DomainError("prompt JSON needs a 'boxes' array");
  }
  PromptSet out;
  try {
    for (const auto& b : j["boxes"]) {
      if (!b.is_array() || b.size() != 4) throw DomainError("each box must be [x0,y0,x1,y1]");
      out.boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
    }
    if (j.contains("points")) {
      for (const auto& p : j["points"]) {
        out.points.push_back({p.at("x").get<double>(), p.at("y").get<double>(),
                              parse_point_label(p.value("label", std::string("positive")))});
      }
    }
  } catch (const ordered_json::exception& e) {
    throw DomainError(std::string("prompt JSON: ") + e.what());
  }
  return out;
}

std::string trace_to_json(const RefineTrace& trace, const std::map<std::string, std::string>& artifacts) {
  ordered_json rounds = ordered_json::array();
  for (const auto& r : trace.rounds) {
    ordered_json jr{{"round", r.index},
                    {"prompts", to_json(r.prompts)},
                    {"scalar_u", r.scalar_u},
                    {"refined_prompts", r.refined ? to_json(*r.refined) : ordered_json(nullptr)},
                    {"refined_scalar_u", r.refined_scalar_u ? ordered_json(*r.refined_scalar_u) : ordered_json(nullptr)},
                    {"accepted", r.accepted},
                    {"note", r.note}};
    rounds.push_back(std::move(jr));
  }
  ordered_json files = ordered_json::object();
  for (const auto& [role, name] : artifacts) files[role] = name;

  ordered_json doc{{"version", 1},
                   {"initial_box", to_json(trace.initial_box)},
                   {"initial_points", to_json(trace.initial_points)},
                   {"initial_scalar_u", trace.initial_scalar_u},
                   {"rounds", rounds},
                   {"final_round", trace.final_round},
                   {"final_scalar_u", trace.final_scalar_u},
                   {"backend_calls", trace.backend_calls},
                   {"artifacts", files}};
  return doc.dump(2) + "\n";
}

}  // namespace uncerseg
