use chrono::NaiveDate;

use super::{AuthorListError, FundingAgency};

pub const AGENCIES_PLACEHOLDER: &str = "{{agencies}}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Acknowledgements {
    pub text: String,
    pub warnings: Vec<String>,
}

/// Substitute the agencies active at `reference_date`, in input order,
/// joined by `"; "`.
pub fn render_acknowledgements(
    agencies: &[FundingAgency],
    reference_date: NaiveDate,
    template: &str,
) -> Result<Acknowledgements, AuthorListError> {
    if !template.contains(AGENCIES_PLACEHOLDER) {
        return Err(AuthorListError::MissingPlaceholder);
    }
    let active: Vec<&str> = agencies
        .iter()
        .filter(|a| a.active_at(reference_date))
        .map(|a| a.name.as_str())
        .collect();
    let mut warnings = Vec::new();
    if active.is_empty() {
        warnings.push(format!("no funding agency active at {reference_date}"));
    }
    Ok(Acknowledgements {
        text: template.replace(AGENCIES_PLACEHOLDER, &active.join("; ")),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agency(name: &str, from: &str, to: Option<&str>) -> FundingAgency {
        FundingAgency {
            name: name.into(),
            active_from: from.parse().unwrap(),
            active_to: to.map(|t| t.parse().unwrap()),
        }
    }

    const TEMPLATE: &str = "We acknowledge the support of {{agencies}}.";

    #[test]
    fn only_active_agencies() {
        let agencies = [
            agency("ANPCyT, Argentina", "2000-01-01", None),
            agency("YerPhI, Armenia", "2000-01-01", Some("2005-01-01")),
            agency("ARC, Australia", "2001-01-01", None),
        ];
        let ack = render_acknowledgements(&agencies, "2018-01-01".parse().unwrap(), TEMPLATE).unwrap();
        assert_eq!(ack.text, "We acknowledge the support of ANPCyT, Argentina; ARC, Australia.");
        assert!(ack.warnings.is_empty());
    }

    #[test]
    fn empty_list_warns() {
        let ack = render_acknowledgements(&[], "2018-01-01".parse().unwrap(), TEMPLATE).unwrap();
        assert_eq!(ack.text, "We acknowledge the support of .");
        assert_eq!(ack.warnings.len(), 1);
    }

    #[test]
    fn placeholder_required() {
        let err = render_acknowledgements(&[], "2018-01-01".parse().unwrap(), "Thanks.").unwrap_err();
        assert!(matches!(err, AuthorListError::MissingPlaceholder));
    }
}
