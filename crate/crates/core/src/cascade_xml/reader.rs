//! Just enough XML for cascade files: elements, attributes, text, comments,
//! the prolog and the five predefined entities. No DTDs, CDATA or namespaces.

use super::XmlError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    pub text: String,
    pub line: usize,
}

impl Element {
    pub fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> XmlError {
        XmlError { line: self.line, message: msg.into() }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn advance(&mut self, n: usize) {
        self.line += self.src[self.pos..self.pos + n].matches('\n').count();
        self.pos += n;
    }

    fn skip_until(&mut self, end: &str, what: &str) -> Result<(), XmlError> {
        match self.rest().find(end) {
            Some(i) => {
                self.advance(i + end.len());
                Ok(())
            }
            None => Err(self.err(format!("unterminated {what}"))),
        }
    }

    fn skip_ws(&mut self) {
        let n = self.rest().len() - self.rest().trim_start().len();
        self.advance(n);
    }

    /// Skips whitespace, comments and processing instructions between elements.
    fn skip_misc(&mut self) -> Result<(), XmlError> {
        loop {
            self.skip_ws();
            if self.rest().starts_with("<!--") {
                self.skip_until("-->", "comment")?;
            } else if self.rest().starts_with("<?") {
                self.skip_until("?>", "processing instruction")?;
            } else if self.rest().starts_with("<!") {
                return Err(self.err("DTD and CDATA sections are not supported"));
            } else {
                return Ok(());
            }
        }
    }

    fn name(&mut self) -> Result<String, XmlError> {
        let n = self
            .rest()
            .find(|c: char| c.is_whitespace() || c == '>' || c == '/' || c == '=')
            .unwrap_or(self.rest().len());
        if n == 0 {
            return Err(self.err("expected a name"));
        }
        let name = self.rest()[..n].to_string();
        self.advance(n);
        Ok(name)
    }

    fn element(&mut self) -> Result<Element, XmlError> {
        let line = self.line;
        if !self.rest().starts_with('<') {
            return Err(self.err("expected '<'"));
        }
        self.advance(1);
        let name = self.name()?;
        let mut attrs = vec![];
        loop {
            self.skip_ws();
            if self.rest().starts_with("/>") {
                self.advance(2);
                return Ok(Element { name, attrs, children: vec![], text: String::new(), line });
            }
            if self.rest().starts_with('>') {
                self.advance(1);
                break;
            }
            let key = self.name()?;
            self.skip_ws();
            if !self.rest().starts_with('=') {
                return Err(self.err(format!("attribute '{key}' has no value")));
            }
            self.advance(1);
            self.skip_ws();
            let quote = self.rest().chars().next().filter(|c| *c == '"' || *c == '\'').ok_or_else(|| self.err("expected quoted attribute value"))?;
            self.advance(1);
            let end = self.rest().find(quote).ok_or_else(|| self.err("unterminated attribute value"))?;
            let value = unescape(&self.rest()[..end]).map_err(|m| self.err(m))?;
            self.advance(end + 1);
            attrs.push((key, value));
        }

        let mut children = vec![];
        let mut text = String::new();
        loop {
            let next = self.rest().find('<').ok_or_else(|| self.err(format!("element <{name}> is never closed")))?;
            text.push_str(&unescape(&self.rest()[..next]).map_err(|m| self.err(m))?);
            self.advance(next);
            if self.rest().starts_with("</") {
                self.advance(2);
                let close = self.name()?;
                if close != name {
                    return Err(self.err(format!("expected </{name}>, found </{close}>")));
                }
                self.skip_ws();
                if !self.rest().starts_with('>') {
                    return Err(self.err("expected '>'"));
                }
                self.advance(1);
                return Ok(Element { name, attrs, children, text, line });
            } else if self.rest().starts_with("<!--") {
                self.skip_until("-->", "comment")?;
            } else if self.rest().starts_with("<?") || self.rest().starts_with("<!") {
                return Err(self.err("unsupported markup inside element"));
            } else {
                children.push(self.element()?);
            }
        }
    }
}

fn unescape(s: &str) -> Result<String, String> {
    if !s.contains('&') {
        return Ok(s.to_string());
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        let end = rest[i..].find(';').ok_or("unterminated entity")?;
        out.push(match &rest[i + 1..i + end] {
            "lt" => '<',
            "gt" => '>',
            "amp" => '&',
            "quot" => '"',
            "apos" => '\'',
            other => return Err(format!("unknown entity &{other};")),
        });
        rest = &rest[i + end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Parses a document and returns its root element.
pub(crate) fn parse_document(src: &str) -> Result<Element, XmlError> {
    let mut r = Reader { src, pos: 0, line: 1 };
    r.skip_misc()?;
    if r.rest().is_empty() {
        return Err(r.err("document has no root element"));
    }
    let root = r.element()?;
    r.skip_misc()?;
    if !r.rest().is_empty() {
        return Err(r.err("content after the root element"));
    }
    Ok(root)
}
