use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Canonical comparison key for a person name.
///
/// Lowercases, strips diacritics and turns punctuation into spaces. When the input has a
/// comma it is read as `surname, given names` and rendered as `surname tokens, initials`;
/// otherwise tokens keep their order. The output is a fixed point of this function.
pub fn normalize_name(raw: &str) -> String {
    let folded = fold(raw);
    match folded.split_once(',') {
        Some((surname, given)) => {
            let surname = tokens(surname).join(" ");
            let initials = tokens(given)
                .iter()
                .filter_map(|t| t.chars().next())
                .map(String::from)
                .collect::<Vec<_>>()
                .join(" ");
            match (surname.is_empty(), initials.is_empty()) {
                (false, false) => format!("{surname}, {initials}"),
                (false, true) => surname,
                (true, _) => initials,
            }
        }
        None => tokens(&folded).join(" "),
    }
}

/// Lowercase, diacritic-free text in which every character other than letters, digits,
/// whitespace and commas has become a space.
fn fold(raw: &str) -> String {
    let lowered: String = raw.chars().flat_map(char::to_lowercase).collect();
    lowered
        .nfkd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .map(|c| {
            if c.is_alphanumeric() || c == ',' {
                c
            } else {
                ' '
            }
        })
        .collect()
}

fn tokens(s: &str) -> Vec<&str> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .collect()
}
