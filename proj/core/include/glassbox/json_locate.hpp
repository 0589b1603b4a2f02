#pragma once

#include <map>
#include <string>
#include <string_view>

namespace glassbox {

// Maps the JSON pointer of every value in `text` ("", "/groups/0/name", ...)
// to the 1-based line on which the value starts. Used to attach line numbers
// to semantic validation errors; `text` must already be valid JSON.
std::map<std::string, int> locate_json_lines(std::string_view text);

}  // namespace glassbox
