use regex::Regex;

const DEFAULT_PATTERNS: &[&str] = &[
    // 宁德时代(300750.SZ)... / 宁德时代（300750）...
    r"^(?P<company>[\p{Han}A-Za-z0-9·]{2,20}?)[（(]\d{6}(?:\.[A-Za-z]{2})?[）)]",
    // company token followed by a period or report-type keyword
    r"^(?P<company>[\p{Han}A-Za-z·]{2,20}?)(?:\d{4}年?|\d{2}Q\d|首次覆盖|年报|年度报告|半年报|中报|一季报|三季报|季报|点评|深度研究|深度报告|研究报告|研究|跟踪报告|跟踪)",
];

/// Tokens that mark a sector or series title rather than a company.
const NOT_A_COMPANY: &[&str] = &["行业", "周报", "月报", "晨报", "策略", "宏观", "市场", "板块", "专题"];

#[derive(Debug, Clone)]
pub struct CompanyPatterns {
    patterns: Vec<Regex>,
}

impl Default for CompanyPatterns {
    fn default() -> Self {
        Self::new(DEFAULT_PATTERNS.iter().copied()).expect("default company patterns compile")
    }
}

impl CompanyPatterns {
    /// Each pattern must define a `company` capture group.
    pub fn new<'a>(patterns: impl IntoIterator<Item = &'a str>) -> Result<Self, regex::Error> {
        Ok(Self {
            patterns: patterns.into_iter().map(Regex::new).collect::<Result<_, _>>()?,
        })
    }
}

/// Company name for a report: the metadata field when present, otherwise the
/// first pattern capture from the title that is not a sector/series token.
pub fn extract_company(
    title: &str,
    metadata_company: Option<&str>,
    patterns: &CompanyPatterns,
) -> Option<String> {
    if let Some(c) = metadata_company.map(str::trim).filter(|c| !c.is_empty()) {
        return Some(c.to_string());
    }
    let title = title.trim();
    patterns
        .patterns
        .iter()
        .filter_map(|re| re.captures(title))
        .filter_map(|caps| caps.name("company").map(|m| m.as_str().to_string()))
        .find(|c| !NOT_A_COMPANY.iter().any(|t| c.contains(t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn company_before_annual_review() {
        let p = CompanyPatterns::default();
        assert_eq!(extract_company("XX科技2023年报点评", None, &p).as_deref(), Some("XX科技"));
    }

    #[test]
    fn sector_weekly_has_no_company() {
        let p = CompanyPatterns::default();
        assert_eq!(extract_company("行业周报：钢铁", None, &p), None);
        assert_eq!(extract_company("钢铁行业研究：供需展望", None, &p), None);
    }

    #[test]
    fn metadata_takes_precedence() {
        let p = CompanyPatterns::default();
        assert_eq!(
            extract_company("宁德时代", Some("宁德时代"), &p).as_deref(),
            Some("宁德时代")
        );
        assert_eq!(
            extract_company("XX科技2023年报点评", Some("XX科技股份有限公司"), &p).as_deref(),
            Some("XX科技股份有限公司")
        );
    }

    #[test]
    fn ticker_form() {
        let p = CompanyPatterns::default();
        assert_eq!(
            extract_company("宁德时代(300750.SZ)：业绩超预期", None, &p).as_deref(),
            Some("宁德时代")
        );
    }
}
