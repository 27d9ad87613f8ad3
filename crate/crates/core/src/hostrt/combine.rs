/// Folds partials pairwise, level by level, keeping index order: neighbours
/// `(0,1), (2,3), ...` merge first and an odd tail moves up unchanged. For an
/// associative `f` the result equals the left fold.
pub fn combine_reduce_partials<T, E>(
    mut partials: Vec<T>,
    mut f: impl FnMut(T, T) -> Result<T, E>,
) -> Result<Option<T>, E> {
    while partials.len() > 1 {
        let mut next = Vec::with_capacity(partials.len().div_ceil(2));
        let mut it = partials.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(f(a, b)?),
                None => next.push(a),
            }
        }
        partials = next;
    }
    Ok(partials.pop())
}
