use chrono::{NaiveDate, Weekday};

fn nth_weekday(year: i32, month: u32, weekday: Weekday, n: u8) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, weekday, n).expect("valid nth weekday")
}

fn last_weekday(year: i32, month: u32, weekday: Weekday) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, weekday, 5)
        .unwrap_or_else(|| nth_weekday(year, month, weekday, 4))
}

fn ymd(year: i32, month: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, month, day).expect("valid date")
}

/// The ten US federal holidays of `year` on their nominal dates.
pub fn federal_holidays(year: i32) -> Vec<NaiveDate> {
    let mut days = vec![
        ymd(year, 1, 1),
        nth_weekday(year, 1, Weekday::Mon, 3),
        nth_weekday(year, 2, Weekday::Mon, 3),
        last_weekday(year, 5, Weekday::Mon),
        ymd(year, 7, 4),
        nth_weekday(year, 9, Weekday::Mon, 1),
        nth_weekday(year, 10, Weekday::Mon, 2),
        ymd(year, 11, 11),
        nth_weekday(year, 11, Weekday::Thu, 4),
        ymd(year, 12, 25),
    ];
    days.sort();
    days
}

/// Thirteen autumn Saturdays starting with the first Saturday of September.
pub fn football_saturdays(year: i32) -> Vec<NaiveDate> {
    let first = nth_weekday(year, 9, Weekday::Sat, 1);
    (0..13).map(|w| first + chrono::Duration::weeks(w)).collect()
}
