#pragma once

#include <map>
#include <string>

#include "uncerseg/ugpa.hpp"

namespace uncerseg {

/// Prompt bundle as {"boxes": [[x0,y0,x1,y1], ...], "points": [{"x","y","label"}, ...]}.
std::string prompts_to_json(const PromptSet& prompts);
PromptSet prompts_from_json(const std::string& text);

/// Trace document; `artifacts` maps roles ("final_mask", ...) to file names.
std::string trace_to_json(const RefineTrace& trace, const std::map<std::string, std::string>& artifacts = {});

}  // namespace uncerseg
