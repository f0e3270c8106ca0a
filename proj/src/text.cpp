#include "hrv/text.hpp"

#include "hrv/error.hpp"

namespace hrv {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::empty_input: return "empty_input";
    case ErrorKind::ingest: return "ingest";
    case ErrorKind::schema: return "schema";
    case ErrorKind::config: return "config";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::leakage: return "leakage";
    case ErrorKind::unresolved_conflict: return "unresolved_conflict";
    case ErrorKind::chain: return "chain";
    case ErrorKind::training_degenerate: return "training_degenerate";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace hrv

namespace hrv::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

bool is_joiner(char32_t cp) {
  return cp == U'-' || cp == U'\'' || cp == 0x2019 || cp == 0x02BC;
}

}  // namespace

char32_t decode(std::string_view s, std::size_t& pos) {
  const auto c0 = static_cast<unsigned char>(s[pos]);
  if (c0 < 0x80) {
    ++pos;
    return c0;
  }
  int extra = 0;
  char32_t cp = 0;
  if ((c0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = c0 & 0x1F;
  } else if ((c0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = c0 & 0x0F;
  } else if ((c0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = c0 & 0x07;
  } else {
    ++pos;
    return kReplacement;
  }
  if (pos + extra >= s.size()) {
    ++pos;
    return kReplacement;
  }
  for (int i = 1; i <= extra; ++i) {
    const auto c = static_cast<unsigned char>(s[pos + i]);
    if (!is_continuation(c)) {
      ++pos;
      return kReplacement;
    }
    cp = (cp << 6) | (c & 0x3F);
  }
  pos += extra + 1;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::u32string to_u32(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) out.push_back(decode(s, pos));
  return out;
}

std::string to_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) append_utf8(out, cp);
  return out;
}

char32_t fold_char(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
  if (cp < 0x80) return cp;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  // Paired upper/lower Cyrillic letters (Ґ/ґ and the historic block).
  if ((cp >= 0x460 && cp <= 0x481) || (cp >= 0x48A && cp <= 0x4BF) ||
      (cp >= 0x4D0 && cp <= 0x52F)) {
    return (cp % 2 == 0) ? cp + 1 : cp;
  }
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x100 && cp <= 0x17F && cp != 0x130 && cp != 0x131 && cp != 0x138 &&
      cp != 0x149 && cp != 0x17F) {
    // Latin Extended-A alternates even/odd except for a shifted middle run.
    if ((cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E)) {
      return (cp % 2 == 1) ? cp + 1 : cp;
    }
    return (cp % 2 == 0) ? cp + 1 : cp;
  }
  return cp;
}

std::string casefold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) append_utf8(out, fold_char(decode(s, pos)));
  return out;
}

bool is_space(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000: case 0xFEFF:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200B;
  }
}

bool is_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

bool is_upper(char32_t cp) { return fold_char(cp) != cp; }

bool is_lower(char32_t cp) {
  if (cp >= U'a' && cp <= U'z') return true;
  if (cp >= 0x430 && cp <= 0x45F) return true;
  if (cp >= 0xDF && cp <= 0xFF && cp != 0xF7) return true;
  if (cp >= 0x3B1 && cp <= 0x3C9) return true;
  if ((cp >= 0x460 && cp <= 0x52F) && cp % 2 == 1) return true;
  return false;
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') || is_digit(cp) ||
           cp == U'_';
  }
  if (is_space(cp)) return false;
  if (cp >= 0xA0 && cp <= 0xBF) return false;        // Latin-1 punctuation and signs
  if (cp == 0xD7 || cp == 0xF7) return false;        // × ÷
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;    // general punctuation, symbols, arrows
  if (cp >= 0x3000 && cp <= 0x303F) return false;    // CJK punctuation
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  if (cp >= 0x1F000) return false;                   // emoji and pictographs
  if (cp == 0xFFFD || cp == 0xFE0F) return false;
  return true;
}

std::string_view trim(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  // Walk by code point so multi-byte spaces (NBSP, thin space) are trimmed too.
  while (begin < end) {
    std::size_t pos = begin;
    if (!is_space(decode(s, pos))) break;
    begin = pos;
  }
  while (end > begin) {
    std::size_t start = end - 1;
    while (start > begin && is_continuation(static_cast<unsigned char>(s[start]))) --start;
    std::size_t pos = start;
    if (!is_space(decode(s, pos))) break;
    end = start;
  }
  return s.substr(begin, end - begin);
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  std::size_t start = std::string_view::npos;
  while (pos < s.size()) {
    const std::size_t here = pos;
    const bool space = is_space(decode(s, pos));
    if (space) {
      if (start != std::string_view::npos) out.push_back(s.substr(start, here - start));
      start = std::string_view::npos;
    } else if (start == std::string_view::npos) {
      start = here;
    }
  }
  if (start != std::string_view::npos) out.push_back(s.substr(start));
  return out;
}

std::size_t count_words(std::string_view s) { return split_whitespace(s).size(); }

std::string normalize(std::string_view s) {
  std::string out;
  for (auto token : split_whitespace(s)) {
    if (!out.empty()) out.push_back(' ');
    out += casefold(token);
  }
  return out;
}

std::vector<Token> word_tokens(std::string_view s) {
  std::vector<Token> out;
  std::size_t pos = 0;
  std::size_t start = std::string_view::npos;
  std::size_t last_word_end = 0;
  while (pos < s.size()) {
    const std::size_t here = pos;
    const char32_t cp = decode(s, pos);
    if (is_word_char(cp)) {
      if (start == std::string_view::npos) start = here;
      last_word_end = pos;
      continue;
    }
    if (start != std::string_view::npos && is_joiner(cp) && pos < s.size()) {
      std::size_t peek = pos;
      if (is_word_char(decode(s, peek))) continue;
    }
    if (start != std::string_view::npos) {
      out.push_back({std::string(s.substr(start, last_word_end - start)), start});
      start = std::string_view::npos;
    }
  }
  if (start != std::string_view::npos) {
    out.push_back({std::string(s.substr(start, last_word_end - start)), start});
  }
  return out;
}

std::vector<std::string> split(std::string_view s, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(delim, start);
    if (at == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, at - start));
    start = at + 1;
  }
}

}  // namespace hrv::text
