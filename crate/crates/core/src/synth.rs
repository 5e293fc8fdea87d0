//! Deterministic synthetic report corpus for tests, benches and demos.
//!
//! Documents are built from per-sector sentence banks so that queries
//! repeat within and across documents, titles classify into real industry
//! labels, and a few passages trip the cleaning rules.

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::corpus::Document;

struct Sector {
    companies: &'static [&'static str],
    themes: &'static [&'static str],
    bank: &'static [&'static str],
}

const SECTORS: &[Sector] = &[
    Sector {
        companies: &["华钢股份", "北岭钢铁", "东海特钢"],
        themes: &["钢铁行业：钢材需求回暖", "钢铁行业：铁矿成本下行", "钢铁行业：吨钢盈利修复"],
        bank: &[
            "三季度钢材价格明显回升。",
            "铁矿石进口成本同比下降。",
            "地产新开工面积降幅收窄，建筑钢材需求边际改善。",
            "钢铁企业吨钢毛利回到盈亏平衡线以上。",
            "粗钢产量调控政策延续，行业供给保持收缩。",
            "特钢产品结构升级带动毛利率提升。",
        ],
    },
    Sector {
        companies: &["招远银行", "江南农商银行", "西部银行"],
        themes: &["银行业：净息差企稳", "银行业：信贷投放加快", "银行业：资产质量改善"],
        bank: &[
            "银行净息差下行压力有所缓解。",
            "对公信贷投放保持较快增长。",
            "存款定期化趋势仍在延续。",
            "不良贷款率环比下降两个基点。",
            "拨备覆盖率维持在较高水平。",
            "零售贷款需求仍然偏弱。",
        ],
    },
    Sector {
        companies: &["芯源半导体", "华微电子", "中科芯片"],
        themes: &["半导体：芯片景气回升", "半导体：国产替代加速", "半导体：库存周期见底"],
        bank: &[
            "半导体行业库存去化接近尾声。",
            "晶圆厂产能利用率逐季回升。",
            "国产设备验证导入速度加快。",
            "消费电子终端需求出现企稳迹象。",
            "先进封装订单保持饱满。",
            "存储芯片价格连续两个季度上涨。",
        ],
    },
    Sector {
        companies: &["康瑞医药", "百济生物", "恒安医疗"],
        themes: &["医药生物：创新药出海提速", "医药生物：集采影响出清", "医药生物：器械需求复苏"],
        bank: &[
            "创新药海外授权交易金额创新高。",
            "集采降价对仿制药收入的影响逐步出清。",
            "医疗器械招标采购恢复正常节奏。",
            "研发费用率维持在较高水平。",
            "核心品种进入医保目录后放量明显。",
            "疫苗业务收入同比有所下滑。",
        ],
    },
    Sector {
        companies: &["阳光光伏", "宁能电池", "远景风电"],
        themes: &["电力设备：光伏装机超预期", "电力设备：储能出货高增", "电力设备：风电招标回暖"],
        bank: &[
            "国内光伏新增装机规模超出市场预期。",
            "硅料价格持续下探，组件成本显著下降。",
            "储能电池出货量同比大幅增长。",
            "海上风电项目招标明显回暖。",
            "电池级碳酸锂价格趋于稳定。",
            "逆变器海外需求保持旺盛。",
        ],
    },
];

const COMPANY_LINES: &[&str] = &[
    "该公司全年营业收入同比增长{n}%。",
    "公司前三季度归母净利润为{n}亿元。",
    "该公司经营性现金流净额同比改善{n}%。",
    "公司计划未来三年维持{n}%以上的分红比例。",
];

const REPORT_KINDS: &[&str] = &["年报点评", "季报点评", "深度研究", "首次覆盖"];

/// Chance that a document reissues the title of the previous report in its
/// sector.
const REISSUE_RATE: f64 = 0.25;

const NOISE_LINES: &[&str] = &[
    "免责声明：本报告仅供本公司客户使用，版权所有，未经许可不得转载。",
    "资料来源：公司公告，研究所整理。",
    "详见 https://example.com/report/detail?id=1024&ref=abc 以及 https://example.com/data/2023/q3/full.csv 。",
];

/// `n` documents, reproducible from `seed`.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date");
    let mut docs: Vec<Document> = Vec::with_capacity(n);
    for i in 0..n {
        let sector = &SECTORS[i % SECTORS.len()];
        let kind = *REPORT_KINDS.choose(&mut rng).expect("non-empty");
        let title = match i.checked_sub(SECTORS.len()) {
            Some(prev) if rng.gen_bool(REISSUE_RATE) => docs[prev].title.clone(),
            _ => {
                let company = *sector.companies.choose(&mut rng).expect("non-empty");
                let theme = *sector.themes.choose(&mut rng).expect("non-empty");
                format!("{company}{kind}：{theme}")
            }
        };
        let text = body(&mut rng, sector, &title);
        docs.push(Document {
            doc_id: format!("doc{i:03}"),
            title,
            text,
            publish_date: base + Days::new(rng.gen_range(0..365)),
            report_type: kind.to_string(),
            company: None,
            ordinal: i,
        });
    }
    docs
}

fn body(rng: &mut ChaCha8Rng, sector: &Sector, title: &str) -> String {
    // the abstract is long enough that the title stays a sentence chunk of its own
    let mut out: Vec<String> = vec![format!("{title}。"), long_clause(rng, sector, 90..100)];
    let len = rng.gen_range(12..40);
    while out.len() < len {
        let roll: f64 = rng.gen();
        let line = if roll < 0.45 {
            sector.bank.choose(rng).expect("non-empty").to_string()
        } else if roll < 0.65 {
            let t = COMPANY_LINES.choose(rng).expect("non-empty");
            t.replace("{n}", &rng.gen_range(3..60).to_string())
        } else if roll < 0.75 && out.len() > 2 {
            // repeat an earlier sentence of this document
            out[rng.gen_range(1..out.len())].clone()
        } else if roll < 0.77 {
            NOISE_LINES.choose(rng).expect("non-empty").to_string()
        } else if roll < 0.80 {
            long_clause(rng, sector, 110..220)
        } else {
            format!(
                "第{}季度毛利率为{}.{}%，环比变动{}个百分点。",
                rng.gen_range(1..5),
                rng.gen_range(10..40),
                rng.gen_range(0..10),
                rng.gen_range(1..5)
            )
        };
        out.push(line);
    }
    out.concat()
}

/// Bank clauses joined by commas into one sentence of at least
/// `len.start` characters.
fn long_clause(rng: &mut ChaCha8Rng, sector: &Sector, len: std::ops::Range<usize>) -> String {
    let target = rng.gen_range(len);
    let mut s = String::new();
    while s.chars().count() < target {
        let b = sector.bank.choose(rng).expect("non-empty");
        s.push_str(b.trim_end_matches('。'));
        s.push('，');
    }
    s.pop();
    s.push('。');
    s
}

/// The corpus in the input JSONL format.
pub fn render_input_jsonl(docs: &[Document]) -> String {
    let mut s = String::new();
    for d in docs {
        let mut v = json!({
            "id": d.doc_id,
            "title": d.title,
            "text": d.text,
            "date": d.publish_date.to_string(),
            "report_type": d.report_type,
        });
        if let Some(c) = &d.company {
            v["company"] = json!(c);
        }
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}
