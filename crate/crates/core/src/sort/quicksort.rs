//! In-place quicksort used for run generation. Median-of-three pivot,
//! insertion sort below a small cutoff, recursion on the smaller side only.
//! Not stable.

use std::cmp::Ordering;

const INSERTION_CUTOFF: usize = 16;

pub fn quicksort<T, F>(items: &mut [T], mut cmp: F)
where
    F: FnMut(&T, &T) -> Ordering,
{
    sort_range(items, &mut cmp);
}

fn sort_range<T, F>(mut items: &mut [T], cmp: &mut F)
where
    F: FnMut(&T, &T) -> Ordering,
{
    loop {
        if items.len() < INSERTION_CUTOFF {
            insertion_sort(items, cmp);
            return;
        }
        let split = partition(items, cmp);
        let (left, right) = items.split_at_mut(split);
        let right = &mut right[1..];
        if left.len() < right.len() {
            sort_range(left, cmp);
            items = right;
        } else {
            sort_range(right, cmp);
            items = left;
        }
    }
}

fn insertion_sort<T, F>(items: &mut [T], cmp: &mut F)
where
    F: FnMut(&T, &T) -> Ordering,
{
    for i in 1..items.len() {
        let mut j = i;
        while j > 0 && cmp(&items[j - 1], &items[j]) == Ordering::Greater {
            items.swap(j - 1, j);
            j -= 1;
        }
    }
}

/// Orders first, middle and last so the median sits in the middle, moves
/// it to the end as pivot, and returns the pivot's final position.
fn partition<T, F>(items: &mut [T], cmp: &mut F) -> usize
where
    F: FnMut(&T, &T) -> Ordering,
{
    let last = items.len() - 1;
    let mid = last / 2;
    if cmp(&items[mid], &items[0]) == Ordering::Less {
        items.swap(mid, 0);
    }
    if cmp(&items[last], &items[0]) == Ordering::Less {
        items.swap(last, 0);
    }
    if cmp(&items[last], &items[mid]) == Ordering::Less {
        items.swap(last, mid);
    }
    items.swap(mid, last);

    let mut store = 0;
    for i in 0..last {
        if cmp(&items[i], &items[last]) == Ordering::Less {
            items.swap(i, store);
            store += 1;
        }
    }
    items.swap(store, last);
    store
}
