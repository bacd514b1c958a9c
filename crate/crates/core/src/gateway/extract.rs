/// Pulls the code out of a model response.
///
/// One fenced block yields its interior, several yield the longest (by line
/// count, first wins ties), none yields the text itself. The result always
/// ends in exactly one newline.
pub fn extract_code(response_text: &str) -> String {
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in response_text.split('\n') {
        let marker = line.trim();
        match current.as_mut() {
            None => {
                if marker.starts_with("```") {
                    current = Some(Vec::new());
                }
            }
            Some(body) => {
                if marker == "```" {
                    blocks.push(current.take().unwrap());
                } else {
                    body.push(line);
                }
            }
        }
    }
    // An unterminated fence runs to the end of the response.
    if let Some(mut body) = current.take() {
        if body.last() == Some(&"") {
            body.pop();
        }
        blocks.push(body);
    }

    let chosen = match blocks.len() {
        0 => response_text.to_string(),
        _ => {
            let mut best = &blocks[0];
            for b in &blocks[1..] {
                if b.len() > best.len() {
                    best = b;
                }
            }
            best.join("\n")
        }
    };
    let trimmed = chosen.trim_end_matches(['\n', '\r']);
    format!("{trimmed}\n")
}
