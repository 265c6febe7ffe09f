//! Prompt template rendering.

use super::{Concept, CultureCondition};

/// Render the metaphor-generation prompt for one grid cell.
///
/// Culture-specific conditions name the culture; the default condition uses
/// the identical template with the culture clause removed, so cultural
/// specification is the only delta between conditions.
pub fn render_prompt(concept: &Concept, culture: &CultureCondition) -> String {
    if culture.is_default {
        format!(
            "Generate a culturally grounded metaphor and complete this sentence: \
             '{} is like ...'. Avoid tourist clichés and shallow stereotypes.",
            concept.name()
        )
    } else {
        format!(
            "Generate a culturally grounded metaphor associated with {} and complete this \
             sentence: '{} is like ...'. Avoid tourist clichés and shallow stereotypes.",
            culture.name,
            concept.name()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn concept(name: &str) -> Concept {
        Concept::new(name).unwrap()
    }

    #[test]
    fn culture_specific_prompt_verbatim() {
        let got = render_prompt(&concept("Time"), &CultureCondition::new("Japan", false).unwrap());
        assert_eq!(
            got,
            "Generate a culturally grounded metaphor associated with Japan and complete this \
             sentence: 'Time is like ...'. Avoid tourist clichés and shallow stereotypes."
        );
    }

    #[test]
    fn default_prompt_drops_only_the_culture_clause() {
        let got = render_prompt(&concept("Death"), &CultureCondition::new("Default", true).unwrap());
        assert_eq!(
            got,
            "Generate a culturally grounded metaphor and complete this sentence: \
             'Death is like ...'. Avoid tourist clichés and shallow stereotypes."
        );
        // String-diff against the non-default template: removing the culture
        // clause must be the only difference.
        let specific = render_prompt(
            &concept("Death"),
            &CultureCondition::new("Japan", false).unwrap(),
        );
        assert_eq!(specific.replace(" associated with Japan", ""), got);
    }

    #[test]
    fn rendering_is_deterministic() {
        let c = concept("Freedom");
        let cc = CultureCondition::new("Brazil", false).unwrap();
        assert_eq!(render_prompt(&c, &cc), render_prompt(&c, &cc));
    }
}
