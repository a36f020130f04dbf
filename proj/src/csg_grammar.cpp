// Text form of CSG scenes:
//
//   scene     := node
//   node      := prim | op "(" node "," node ")"
//   op        := "union" | "difference" | "intersection"
//   prim      := kind "(" kv ("," kv)* ")" [ "@" transform ]
//   transform := { "t(" x "," y "," z ")" | "r(" qw "," qx "," qy "," qz ")" | "s(" k ")" }
//
// `#` starts a comment running to end of line. A comment of the form
// `# shad3s-scene seed=S max_solids=K ground=G` carries scene metadata.

#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "shad3s/csg.hpp"

namespace shad3s {

namespace {

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct KeySpec {
  PrimitiveKind kind;
  std::vector<std::string_view> keys;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs{
      {PrimitiveKind::sphere, {"r"}},
      {PrimitiveKind::box, {"hx", "hy", "hz"}},
      {PrimitiveKind::cylinder, {"r", "h"}},
      {PrimitiveKind::cone, {"r", "h"}},
      {PrimitiveKind::torus, {"major", "minor"}},
  };
  return specs;
}

const KeySpec* find_kind(std::string_view word) {
  for (const auto& spec : key_specs())
    if (to_string(spec.kind) == word) return &spec;
  return nullptr;
}

std::optional<BoolOp> find_op(std::string_view word) {
  for (auto op : {BoolOp::union_, BoolOp::difference, BoolOp::intersection})
    if (to_string(op) == word) return op;
  return std::nullopt;
}

void write_node(std::ostringstream& out, const CsgNode& node, int indent) {
  out << std::string(static_cast<std::size_t>(indent) * 2, ' ');
  if (node.is_leaf()) {
    const auto& leaf = node.as_leaf();
    const auto& spec = *find_kind(to_string(leaf.primitive.kind));
    out << to_string(leaf.primitive.kind) << '(';
    for (std::size_t i = 0; i < spec.keys.size(); ++i) {
      if (i) out << ", ";
      out << spec.keys[i] << '=' << format_number(leaf.primitive.params[i]);
    }
    const auto& t = leaf.transform;
    out << ") @t(" << format_number(t.translation.x()) << ", " << format_number(t.translation.y()) << ", "
        << format_number(t.translation.z()) << ") r(" << format_number(t.rotation.w()) << ", "
        << format_number(t.rotation.x()) << ", " << format_number(t.rotation.y()) << ", "
        << format_number(t.rotation.z()) << ") s(" << format_number(t.scale) << ')';
    return;
  }
  const auto& o = node.as_operation();
  out << to_string(o.op) << "(\n";
  write_node(out, *o.left, indent + 1);
  out << ",\n";
  write_node(out, *o.right, indent + 1);
  out << '\n' << std::string(static_cast<std::size_t>(indent) * 2, ' ') << ')';
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  CsgScene parse() {
    CsgScene scene;
    skip_space();
    if (!at_end()) scene.root = parse_node();
    skip_space();
    if (!at_end()) fail("unexpected trailing input");
    scene.seed = seed_;
    scene.ground_height = ground_;
    const int leaves = scene.leaf_count();
    if (leaves > kMaxSolids)
      throw SemanticError("scene has " + std::to_string(leaves) + " solids, more than " + std::to_string(kMaxSolids));
    scene.max_solids = max_solids_.value_or(std::max(leaves, 1));
    if (scene.max_solids < 1 || scene.max_solids > kMaxSolids)
      throw SemanticError("max_solids must lie in [1, 6]");
    if (leaves > scene.max_solids) throw SemanticError("scene has more solids than its max_solids");
    return scene;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, column_); }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_space() {
    while (!at_end()) {
      const char c = peek();
      if (c == '#') {
        const std::size_t start = pos_;
        while (!at_end() && peek() != '\n') advance();
        read_metadata(text_.substr(start, pos_ - start));
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  void read_metadata(std::string_view comment) {
    constexpr std::string_view tag = "# shad3s-scene";
    if (comment.substr(0, tag.size()) != tag) return;
    std::istringstream in{std::string(comment.substr(tag.size()))};
    std::string item;
    while (in >> item) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = item.substr(0, eq);
      const std::string value = item.substr(eq + 1);
      try {
        if (key == "seed") seed_ = std::stoull(value);
        else if (key == "max_solids") max_solids_ = std::stoi(value);
        else if (key == "ground") ground_ = std::stod(value);
      } catch (const std::exception&) {
        fail("bad metadata value for " + key);
      }
    }
  }

  void expect(char c) {
    skip_space();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    advance();
  }

  bool accept(char c) {
    skip_space();
    if (peek() != c) return false;
    advance();
    return true;
  }

  std::string_view identifier() {
    skip_space();
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) advance();
    if (pos_ == start) fail("expected identifier");
    return text_.substr(start, pos_ - start);
  }

  double number() {
    skip_space();
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    if (*first == '+') ++first;
    double value = 0.0;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc()) fail("expected number");
    while (text_.data() + pos_ < res.ptr) advance();
    return value;
  }

  NodePtr parse_node() {
    const int line = line_;
    const int column = column_;
    const std::string_view word = identifier();
    if (const auto op = find_op(word)) {
      expect('(');
      NodePtr left = parse_node();
      expect(',');
      NodePtr right = parse_node();
      expect(')');
      return CsgNode::operation(*op, std::move(left), std::move(right));
    }
    const KeySpec* spec = find_kind(word);
    if (!spec) throw ParseError("unknown solid or operation '" + std::string(word) + "'", line, column);
    return parse_primitive(*spec);
  }

  NodePtr parse_primitive(const KeySpec& spec) {
    std::map<std::string, double, std::less<>> values;
    expect('(');
    do {
      const std::string_view key = identifier();
      expect('=');
      const double value = number();
      if (std::find(spec.keys.begin(), spec.keys.end(), key) == spec.keys.end())
        throw SemanticError("unknown parameter '" + std::string(key) + "' for " + std::string(to_string(spec.kind)));
      if (!values.emplace(std::string(key), value).second)
        throw SemanticError("duplicate parameter '" + std::string(key) + "'");
    } while (accept(','));
    expect(')');

    Primitive primitive;
    primitive.kind = spec.kind;
    primitive.params = {0, 0, 0};
    for (std::size_t i = 0; i < spec.keys.size(); ++i) {
      const auto it = values.find(spec.keys[i]);
      if (it == values.end())
        throw SemanticError("missing parameter '" + std::string(spec.keys[i]) + "' for " +
                            std::string(to_string(spec.kind)));
      primitive.params[i] = it->second;
    }

    Transform transform;
    if (accept('@')) parse_transform(transform);
    if (std::abs(transform.rotation.norm() - 1.0) > 1e-6) throw SemanticError("rotation quaternion must be unit");
    return CsgNode::leaf(primitive, transform);
  }

  void parse_transform(Transform& t) {
    bool seen_t = false, seen_r = false, seen_s = false;
    for (;;) {
      skip_space();
      const char c = peek();
      if (c == 't' && !seen_t) {
        advance();
        expect('(');
        const double x = number();
        expect(',');
        const double y = number();
        expect(',');
        const double z = number();
        expect(')');
        t.translation = Vec3(x, y, z);
        seen_t = true;
      } else if (c == 'r' && !seen_r) {
        advance();
        expect('(');
        const double w = number();
        expect(',');
        const double x = number();
        expect(',');
        const double y = number();
        expect(',');
        const double z = number();
        expect(')');
        t.rotation = Quat(w, x, y, z);
        seen_r = true;
      } else if (c == 's' && !seen_s) {
        advance();
        expect('(');
        t.scale = number();
        expect(')');
        seen_s = true;
      } else {
        break;
      }
    }
    if (!seen_t && !seen_r && !seen_s) fail("expected transform after '@'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
  std::uint64_t seed_ = 0;
  std::optional<int> max_solids_;
  double ground_ = 0.0;
};

}  // namespace

std::string serialize_scene(const CsgScene& scene) {
  std::ostringstream out;
  out << "# shad3s-scene seed=" << scene.seed << " max_solids=" << scene.max_solids
      << " ground=" << format_number(scene.ground_height) << '\n';
  if (scene.root) {
    write_node(out, *scene.root, 0);
    out << '\n';
  }
  return out.str();
}

CsgScene parse_scene(std::string_view text) { return Parser(text).parse(); }

}  // namespace shad3s
