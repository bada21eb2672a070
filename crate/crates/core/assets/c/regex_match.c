/* Continuation-based regular expression matcher.
 *
 * The three-argument matcher is match_cont; match is the entry point.
 * A star iteration that consumed no input does not re-enter the same
 * star (the mark field), so nullable star bodies terminate.
 */
typedef enum { OR, SEQ, STAR, RANGE } RegexOp;
typedef struct Regex Regex;
struct Regex {
    RegexOp op; int clo; int chi;
    Regex* left; Regex* right;
};
typedef struct RegexCont RegexCont;
struct RegexCont {
    Regex* regex;
    RegexCont* next;
    const char* mark;
};

static int match_cont(Regex* regex, RegexCont* cont, const char* text);

static int match_resume(RegexCont* cont, const char* text) {
  if (cont->mark != NULL) {
    if (cont->mark == text) {return 0;}
    return match_resume(cont->next, text);
  }
  return match_cont(cont->regex, cont->next, text);
}

static int match_cont(Regex* regex, RegexCont* cont, const char* text) {
  if (regex == NULL) {return *text == '\0';}
  if (regex->op == OR) {
    return match_cont(regex->left, cont, text) ||
    match_cont(regex->right, cont, text);
  }
  if (regex->op == SEQ) {
    RegexCont c;
    c.next = cont; c.regex = regex->right; c.mark = NULL;
    return match_cont(regex->left, &c, text);
  }
  if (regex->op == STAR) {
    RegexCont again; RegexCont guard;
    if (match_resume(cont, text)) {return 1;}
    if (*text == '\0') {return 0;}
    again.regex = regex; again.next = cont; again.mark = NULL;
    guard.regex = NULL; guard.next = &again; guard.mark = text;
    return match_cont(regex->left, &guard, text);
  }
  if (regex->op == RANGE) {
    char c = *text++;
    return c != '\0' && c >= regex->clo &&
    c <= regex->chi &&
    match_resume(cont, text);
  }
  return 0;
}

static int match(Regex* regex, const char* text) {
  RegexCont cont;
  cont.next = NULL; cont.regex = NULL; cont.mark = NULL;
  return match_cont(regex, &cont, text);
}
